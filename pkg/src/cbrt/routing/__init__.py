"""Discrete-event routing simulator with the CBRT and ExOR protocols."""

from cbrt.routing.beacons import LinkEstimator, beacon_round
from cbrt.routing.cbrt import CbrtRouter, candidate_metrics
from cbrt.routing.energy import Action, EnergyLedger, airtime, energy_account
from cbrt.routing.engine import RunResult, Simulation, run
from cbrt.routing.events import Event, EventKind
from cbrt.routing.exor import ExorRouter, exor_forward
from cbrt.routing.forwarding import opportunistic_forward
from cbrt.routing.metrics import METRIC_COLUMNS, MetricsLog, sample_metrics
from cbrt.routing.packets import Candidate, CandidateRelaySet, HopResult, Outcome, Packet

__all__ = [
    "METRIC_COLUMNS",
    "Action",
    "Candidate",
    "CandidateRelaySet",
    "CbrtRouter",
    "EnergyLedger",
    "Event",
    "EventKind",
    "ExorRouter",
    "HopResult",
    "LinkEstimator",
    "MetricsLog",
    "Outcome",
    "Packet",
    "RunResult",
    "Simulation",
    "airtime",
    "beacon_round",
    "candidate_metrics",
    "energy_account",
    "exor_forward",
    "opportunistic_forward",
    "run",
    "sample_metrics",
]
