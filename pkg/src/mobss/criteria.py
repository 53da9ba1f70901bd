"""Separation criteria, scalarization and the feasibility penalty.

All criteria are minimized. Given mixtures ``x`` and a separation matrix
``W`` with rows ``w_i``, the estimates are ``y_i(t) = w_i^T x(t)`` and

* time-correlation: ``-sum_i |E[y_i(t) y_i(t - lag)]|`` with the estimates
  centered first (always <= 0, quadratic in each row);
* sparsity: ``sum_i ||y_i||_1 / ||y_i||_2`` on the raw estimates (each term
  in [1, sqrt(T)], invariant under positive row scaling);
* decorrelation: ``sum_{i<j} pearson(y_i, y_j)^2``.

A candidate is infeasible when any pair of its estimates has |Pearson|
above a threshold; infeasible candidates get a large constant added to
every objective entry rather than being rejected, so they can still seed
early exploration.

:class:`ObjectiveEvaluator` packages a criteria list plus the feasibility
rule into a genome -> objective-vector map, with a vectorized batch path
used by the evolutionary engine.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signals import SignalMatrix

CRITERION_IDS = ("time-correlation", "sparsity", "decorrelation")


@dataclass(frozen=True)
class CriterionSpec:
    """One separation criterion; ``lag`` is required for time-correlation."""

    id: str
    lag: int | None = None

    def __post_init__(self):
        if self.id not in CRITERION_IDS:
            raise ValueError(f"unknown criterion {self.id!r} (expected one of {CRITERION_IDS})")
        if self.id == "time-correlation":
            if self.lag is None or self.lag < 1:
                raise ValueError("time-correlation requires a positive lag")
        elif self.lag is not None:
            raise ValueError(f"criterion {self.id!r} takes no lag")


@dataclass
class ObjectiveVector:
    values: np.ndarray
    penalized: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        if not np.isfinite(self.values).all():
            raise ValueError("objective vector contains non-finite entries")


def _w_array(w) -> np.ndarray:
    arr = np.asarray(getattr(w, "w", w), dtype=float)
    if arr.ndim != 2:
        raise ValueError("separation matrix must be 2-D")
    return arr


def _x_array(x) -> np.ndarray:
    if isinstance(x, SignalMatrix):
        return x.data
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 2:
        raise ValueError("mixtures must be 2-D (channels x samples)")
    return arr


def _estimates(w, x) -> np.ndarray:
    wa, xa = _w_array(w), _x_array(x)
    if wa.shape[1] != xa.shape[0]:
        raise ValueError(
            f"separation matrix has {wa.shape[1]} columns but mixtures have "
            f"{xa.shape[0]} channels"
        )
    return wa @ xa


def j_timecorr(w, x, lag: int) -> float:
    """Negated summed |lagged autocovariance| of the estimates."""
    y = _estimates(w, x)
    if not 0 < lag < y.shape[1]:
        raise ValueError(f"lag must lie in [1, {y.shape[1] - 1}], got {lag}")
    yc = y - y.mean(axis=1, keepdims=True)
    prods = np.mean(yc[:, lag:] * yc[:, :-lag], axis=1)
    return float(-np.sum(np.abs(prods)))


def j_sparsity(w, x) -> float:
    """Summed l1/l2 ratio of the estimates (scale-free sparsity measure)."""
    y = _estimates(w, x)
    l2 = np.linalg.norm(y, axis=1)
    if np.any(l2 == 0.0):
        raise ValueError("sparsity criterion undefined for an all-zero estimate")
    l1 = np.abs(y).sum(axis=1)
    return float(np.sum(l1 / l2))


def j_decorr(w, x) -> float:
    """Sum of squared pairwise Pearson coefficients between estimates."""
    y = _estimates(w, x)
    yc = y - y.mean(axis=1, keepdims=True)
    sd = np.sqrt(np.mean(yc * yc, axis=1))
    if np.any(sd == 0.0):
        raise ValueError("decorrelation criterion undefined for a constant estimate")
    total = 0.0
    n = y.shape[0]
    for i in range(n):
        for j in range(i + 1, n):
            r = np.mean(yc[i] * yc[j]) / (sd[i] * sd[j])
            total += r * r
    return float(total)


def weighted_sum(obj: ObjectiveVector, weights) -> float:
    """Scalarize an objective vector with nonnegative weights."""
    lam = np.asarray(weights, dtype=float).ravel()
    if lam.size != obj.values.size:
        raise ValueError(f"{lam.size} weights for {obj.values.size} objectives")
    if np.any(lam < 0.0):
        raise ValueError("weights must be nonnegative")
    if lam.sum() == 0.0:
        raise ValueError("weights must not all be zero")
    return float(lam @ obj.values)


def _criterion_value(spec: CriterionSpec, w, x) -> float:
    if spec.id == "time-correlation":
        return j_timecorr(w, x, spec.lag)
    if spec.id == "sparsity":
        return j_sparsity(w, x)
    return j_decorr(w, x)


def _max_abs_pairwise_pearson(y: np.ndarray) -> float:
    yc = y - y.mean(axis=1, keepdims=True)
    sd = np.sqrt(np.mean(yc * yc, axis=1))
    if np.any(sd == 0.0):
        raise ValueError("feasibility check undefined for a constant estimate")
    worst = 0.0
    n = y.shape[0]
    for i in range(n):
        for j in range(i + 1, n):
            r = abs(np.mean(yc[i] * yc[j]) / (sd[i] * sd[j]))
            if r > worst:
                worst = r
    return worst


def evaluate(w, x, specs, threshold: float, penalty: float) -> ObjectiveVector:
    """Evaluate all criteria, adding the feasibility penalty when estimates
    of any two rows have |Pearson| strictly above the threshold."""
    if not specs:
        raise ValueError("need at least one criterion")
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    if penalty <= 0.0:
        raise ValueError(f"penalty must be positive, got {penalty}")
    values = np.array([_criterion_value(spec, w, x) for spec in specs])
    y = _estimates(w, x)
    penalized = y.shape[0] > 1 and _max_abs_pairwise_pearson(y) > threshold
    if penalized:
        values = values + penalty
    return ObjectiveVector(values, penalized)


class ObjectiveEvaluator:
    """Maps flattened separation-matrix genomes to objective vectors.

    Holds the mixtures read-only, so many candidates can be evaluated
    against it concurrently; ``batch`` evaluates a whole generation in a
    few vectorized passes and matches the scalar path bit for bit.
    """

    def __init__(self, mixtures, specs, threshold: float, penalty: float):
        self.x = _x_array(mixtures)
        self.specs = list(specs)
        if not self.specs:
            raise ValueError("need at least one criterion")
        if not 0.0 < threshold < 1.0:
            raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
        if penalty <= 0.0:
            raise ValueError(f"penalty must be positive, got {penalty}")
        self.threshold = threshold
        self.penalty = penalty
        self.channels = self.x.shape[0]

    @property
    def objective_count(self) -> int:
        return len(self.specs)

    @property
    def genome_length(self) -> int:
        return self.channels * self.channels

    def _reshape(self, genome) -> np.ndarray:
        g = np.asarray(genome, dtype=float).ravel()
        if g.size != self.genome_length:
            raise ValueError(f"genome length {g.size}, expected {self.genome_length}")
        return g.reshape(self.channels, self.channels)

    def __call__(self, genome) -> ObjectiveVector:
        return evaluate(self._reshape(genome), self.x, self.specs, self.threshold, self.penalty)

    def batch(self, genomes) -> list[ObjectiveVector]:
        """Evaluate a stack of genomes (rows) in vectorized form."""
        values, penalized = self.batch_values(genomes)
        return [ObjectiveVector(values[i], bool(penalized[i])) for i in range(values.shape[0])]

    def batch_values(self, genomes) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized criteria values: (n, K) floats plus an (n,) penalty mask."""
        g = np.asarray(genomes, dtype=float)
        if g.ndim != 2 or g.shape[1] != self.genome_length:
            raise ValueError(f"expected (n, {self.genome_length}) genomes, got {g.shape}")
        n = g.shape[0]
        ws = g.reshape(n, self.channels, self.channels)
        y = ws @ self.x  # (n, channels, samples)
        yc = y - y.mean(axis=2, keepdims=True)

        values = np.empty((n, len(self.specs)))
        for k, spec in enumerate(self.specs):
            if spec.id == "time-correlation":
                lag = spec.lag
                if lag >= y.shape[2]:
                    raise ValueError(f"lag {lag} >= sample count {y.shape[2]}")
                prods = np.mean(yc[:, :, lag:] * yc[:, :, :-lag], axis=2)
                values[:, k] = -np.sum(np.abs(prods), axis=1)
            elif spec.id == "sparsity":
                l2 = np.linalg.norm(y, axis=2)
                if np.any(l2 == 0.0):
                    raise ValueError("sparsity criterion undefined for an all-zero estimate")
                values[:, k] = np.sum(np.abs(y).sum(axis=2) / l2, axis=1)
            else:
                sd = np.sqrt(np.mean(yc * yc, axis=2))
                if np.any(sd == 0.0):
                    raise ValueError("decorrelation criterion undefined for a constant estimate")
                total = np.zeros(n)
                for i in range(self.channels):
                    for j in range(i + 1, self.channels):
                        r = np.mean(yc[:, i] * yc[:, j], axis=1) / (sd[:, i] * sd[:, j])
                        total += r * r
                values[:, k] = total

        penalized = np.zeros(n, dtype=bool)
        if self.channels > 1:
            sd = np.sqrt(np.mean(yc * yc, axis=2))
            if np.any(sd == 0.0):
                raise ValueError("feasibility check undefined for a constant estimate")
            for i in range(self.channels):
                for j in range(i + 1, self.channels):
                    r = np.abs(np.mean(yc[:, i] * yc[:, j], axis=1) / (sd[:, i] * sd[:, j]))
                    penalized |= r > self.threshold
        values[penalized] += self.penalty
        return values, penalized


class ScalarizedEvaluator:
    """Weighted-sum view of an :class:`ObjectiveEvaluator` (length-1 vectors)."""

    def __init__(self, base: ObjectiveEvaluator, weights):
        self.base = base
        self.weights = np.asarray(weights, dtype=float).ravel()
        if self.weights.size != base.objective_count:
            raise ValueError(
                f"{self.weights.size} weights for {base.objective_count} objectives"
            )
        if np.any(self.weights < 0.0) or self.weights.sum() == 0.0:
            raise ValueError("weights must be nonnegative and not all zero")

    @property
    def genome_length(self) -> int:
        return self.base.genome_length

    def __call__(self, genome) -> ObjectiveVector:
        obj = self.base(genome)
        return ObjectiveVector([weighted_sum(obj, self.weights)], obj.penalized)

    def batch(self, genomes) -> list[ObjectiveVector]:
        values, penalized = self.base.batch_values(genomes)
        scalar = values @ self.weights
        return [ObjectiveVector([scalar[i]], bool(penalized[i])) for i in range(len(scalar))]
