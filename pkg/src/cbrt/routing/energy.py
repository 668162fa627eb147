"""
Radio energy accounting.

Transmit power follows the sender's range: above half the initial range the
radio runs at the high power level, otherwise at the low one. Receiving costs
the receive power for the packet's airtime. Idle listening is free.
"""

from __future__ import annotations

import enum
from collections import defaultdict


class Action(str, enum.Enum):
    TX = "tx"
    RX = "rx"
    IDLE = "idle"


def airtime(bits: int, rate_bps: float) -> float:
    return bits / rate_bps


def tx_power(range_m: float, initial_range: float, radio) -> float:
    return radio.tx_high_w if range_m > initial_range / 2.0 else radio.tx_low_w


def power_draw(action: Action, range_m: float, initial_range: float, radio) -> float:
    action = Action(action)
    if action is Action.TX:
        return tx_power(range_m, initial_range, radio)
    if action is Action.RX:
        return radio.rx_w
    return 0.0


def energy_account(world, i: int, action: Action, duration: float, radio) -> float:
    """Charge node i for ``duration`` seconds of ``action``; returns joules removed."""
    if duration < 0:
        raise ValueError("duration must be non-negative")
    watts = power_draw(action, float(world.range[i]), world.cfg.initial_range, radio)
    return world.charge(i, watts * duration)


class EnergyLedger:
    """Running record of every charge actually applied, by traffic kind and action."""

    def __init__(self):
        self.by_kind: dict[str, float] = defaultdict(float)
        self.by_node: dict[int, float] = defaultdict(float)

    def charge(self, world, i: int, action: Action, duration: float, radio, kind: str) -> float:
        applied = energy_account(world, i, action, duration, radio)
        if applied:
            self.by_kind[f"{kind}.{Action(action).value}"] += applied
            self.by_node[int(i)] += applied
        return applied

    @property
    def total(self) -> float:
        return float(sum(self.by_kind.values()))
