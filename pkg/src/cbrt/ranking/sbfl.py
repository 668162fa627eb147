"""
Single-input fuzzy weighting of cross-layer metrics and rank-based node utilities.

Each metric column is summarised by its relative variance (scale-free
dispersion). The relative variances are normalised by their maximum and pushed
through a one-input, one-output Mamdani system whose rule base maps input term
k to output term k, so the rule count stays at ``term_count`` however many
metrics there are. The defuzzified outputs weight the per-metric ranks of
every candidate; the weighted rank sum is the candidate's utility.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Literal, NamedTuple

import numpy as np
from scipy.stats import rankdata

from cbrt.errors import DimensionMismatch, MeanIsZero, RuleCountOverflow
from cbrt.ranking.table import MetricTable, Orientation

logger = logging.getLogger(__name__)

MAX_RULES = np.iinfo(np.int64).max


class TriangularTerm(NamedTuple):
    left: float
    peak: float
    right: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        rise = np.where(self.peak > self.left, (x - self.left) / max(self.peak - self.left, 1e-300), 1.0)
        fall = np.where(self.right > self.peak, (self.right - x) / max(self.right - self.peak, 1e-300), 1.0)
        mu = np.where(x <= self.peak, rise, fall)
        return np.clip(mu, 0.0, 1.0)


@dataclass(frozen=True)
class FuzzySystem:
    """Evenly spaced triangular terms on [0, 1], one rule per term.

    Neighbouring terms cross at membership 0.5, so every point of the
    universe has positive membership in at least one term.
    """

    term_count: int = 7
    resolution: int = 10001

    def __post_init__(self):
        if self.term_count < 1:
            raise ValueError("term_count must be positive")
        if self.resolution < 3:
            raise ValueError("resolution must be at least 3")

    @classmethod
    def default(cls) -> "FuzzySystem":
        return cls()

    @cached_property
    def input_memberships(self) -> tuple[TriangularTerm, ...]:
        if self.term_count == 1:
            return (TriangularTerm(0.0, 0.5, 1.0),)
        width = 1.0 / (self.term_count - 1)
        return tuple(
            TriangularTerm(k * width - width, k * width, k * width + width)
            for k in range(self.term_count)
        )

    @property
    def output_memberships(self) -> tuple[TriangularTerm, ...]:
        return self.input_memberships

    @property
    def rules(self) -> tuple[tuple[int, int], ...]:
        return tuple((k, k) for k in range(self.term_count))

    @cached_property
    def _universe(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.resolution)

    @cached_property
    def _output_curves(self) -> np.ndarray:
        curves = np.vstack([term(self._universe) for term in self.output_memberships])
        if self.term_count == 1:
            curves[:] = 1.0
        return curves

    def fuzzify(self, x: float) -> np.ndarray:
        if self.term_count == 1:
            return np.ones(1)
        return np.array([float(term(x)) for term in self.input_memberships])

    def infer(self, x: float) -> float:
        """Fire the rule base for one normalised input and defuzzify by centroid."""
        strengths = self.fuzzify(x)
        consequents = np.array([strengths[k] for k, _ in self.rules])
        targets = [out for _, out in self.rules]
        clipped = np.minimum(self._output_curves[targets], consequents[:, None])
        aggregate = clipped.max(axis=0)
        mass = aggregate.sum()
        if mass == 0.0:
            return 0.5
        return float(np.dot(self._universe, aggregate) / mass)


def relative_variance(column) -> float:
    """Mean squared deviation normalised by the column mean."""
    u = np.asarray(column, dtype=float)
    if u.size == 0:
        raise ValueError("relative_variance of an empty column")
    mean = u.mean()
    if mean == 0.0:
        raise MeanIsZero("column mean is zero; relative variance undefined")
    return float(np.mean(((u - mean) / mean) ** 2))


def variance(column) -> float:
    """Population variance."""
    u = np.asarray(column, dtype=float)
    if u.size == 0:
        raise ValueError("variance of an empty column")
    return float(np.var(u))


def relative_variances(table: MetricTable, *, warn: bool = True) -> np.ndarray:
    """rv per column; zero-mean columns count as rv = 0."""
    rv = np.zeros(table.n)
    for j in range(table.n):
        try:
            rv[j] = relative_variance(table.column(j))
        except MeanIsZero:
            log = logger.warning if warn else logger.debug
            log("column %r has zero mean; using rv = 0", table.column_names[j])
    return rv


def fuzzy_weight(x: float, sys: FuzzySystem) -> float:
    """Weight for one normalised relative variance in [0, 1]."""
    return sys.infer(min(max(float(x), 0.0), 1.0))


def fuzzy_weights(rv, sys: FuzzySystem) -> np.ndarray:
    rv = np.asarray(rv, dtype=float)
    if rv.size and (not np.all(np.isfinite(rv)) or np.any(rv < 0)):
        raise ValueError("relative variances must be finite and non-negative")
    top = rv.max() if rv.size else 0.0
    x = rv / top if top > 0 else np.zeros_like(rv)
    return np.array([fuzzy_weight(xi, sys) for xi in x])


def rank_table(table: MetricTable) -> np.ndarray:
    """Per-column ranks where a larger rank is always better.

    Benefit columns rank ascending by value, cost columns descending; tied
    entries share the smallest rank of their group.
    """
    ranks = np.empty(table.values.shape, dtype=int)
    for j, orientation in enumerate(table.orientations):
        col = table.column(j)
        key = col if orientation is Orientation.BENEFIT else -col
        ranks[:, j] = rankdata(key, method="min").astype(int)
    return ranks


def node_utilities(ranks, w) -> np.ndarray:
    ranks = np.asarray(ranks, dtype=float)
    w = np.asarray(w, dtype=float)
    if ranks.ndim != 2 or w.ndim != 1 or ranks.shape[1] != w.shape[0]:
        raise DimensionMismatch(f"ranks {ranks.shape} do not match weights {w.shape}")
    return ranks @ w


@dataclass(frozen=True)
class SbflReport:
    table: MetricTable
    rv: np.ndarray
    weights: np.ndarray
    ranks: np.ndarray
    utilities: np.ndarray
    order: list[tuple[int, float]]


def sbfl_report(table: MetricTable, sys: FuzzySystem, *, warn_zero_mean: bool = True) -> SbflReport:
    rv = relative_variances(table, warn=warn_zero_mean)
    weights = fuzzy_weights(rv, sys)
    ranks = rank_table(table)
    utilities = node_utilities(ranks, weights)
    order = sorted(((i, float(u)) for i, u in enumerate(utilities)), key=lambda iu: (-iu[1], iu[0]))
    return SbflReport(table, rv, weights, ranks, utilities, order)


def prioritize(table: MetricTable, sys: FuzzySystem, *, warn_zero_mean: bool = True) -> list[tuple[int, float]]:
    """Candidates by descending utility; equal utilities keep ascending index."""
    return sbfl_report(table, sys, warn_zero_mean=warn_zero_mean).order


def rule_count(term_count: int, metric_count: int, mode: Literal["classic", "sbfl"]) -> int:
    if term_count < 1 or metric_count < 1:
        raise ValueError("term_count and metric_count must be positive")
    if mode == "sbfl":
        return term_count
    if mode != "classic":
        raise ValueError(f"unknown mode {mode!r}")
    count = term_count ** metric_count
    if count > MAX_RULES:
        raise RuleCountOverflow(f"{term_count}^{metric_count} rules exceed {MAX_RULES}")
    return count
