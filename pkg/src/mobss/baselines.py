"""Mono-objective baselines and the supervised least-squares benchmark.

The mono baselines reuse the same evolutionary engine in scalar mode
(weighted-sum objective, length-1 vectors) so comparisons against the
multi-objective run isolate the problem formulation rather than the
solver. The least-squares benchmark is the closed-form separation matrix
``W = E[s x^T] (E[x x^T])^-1``; it requires the true sources, so it is a
supervised reference only.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from . import spea2
from .criteria import CriterionSpec, ObjectiveEvaluator, ScalarizedEvaluator
from .signals import SignalMatrix


@dataclass
class BaselineResult:
    w: np.ndarray
    objective_value: float
    wall_time: float
    method: str  # "mono-single" | "mono-weighted" | "mse-closed-form"

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float)
        if not np.isfinite(self.objective_value):
            raise ValueError("baseline objective must be finite")
        if self.wall_time < 0:
            raise ValueError("wall_time must be nonnegative")


def _scalar_engine_run(evaluator, cfg: spea2.EngineConfig) -> tuple[np.ndarray, float, float]:
    started = time.perf_counter()
    result = spea2.run(cfg, evaluator, snapshot_every=cfg.max_iterations)
    elapsed = time.perf_counter() - started
    values = [float(c.objectives.values[0]) for c in result.archive]
    best = int(np.argmin(values))
    return result.archive[best].genome.copy(), values[best], elapsed


def mono_optimize(
    spec,
    mixtures,
    cfg: spea2.EngineConfig,
    threshold: float,
    penalty: float,
    weights=None,
) -> BaselineResult:
    """Optimize a single criterion, or a weighted bundle of criteria, with
    the evolutionary engine in scalar mode.

    ``spec`` is one :class:`CriterionSpec` (mono-single) or a list of specs
    with ``weights`` (mono-weighted). The feasibility penalty stays active
    exactly as in the multi-objective run. Returns the best-ever matrix.
    """
    if isinstance(spec, CriterionSpec):
        specs = [spec]
        lam = [1.0]
        method = "mono-single"
    else:
        specs = list(spec)
        if weights is None:
            raise ValueError("a weighted bundle needs explicit weights")
        lam = list(weights)
        method = "mono-weighted"
    base = ObjectiveEvaluator(mixtures, specs, threshold, penalty)
    evaluator = ScalarizedEvaluator(base, lam)
    genome, value, elapsed = _scalar_engine_run(evaluator, cfg)
    n = base.channels
    return BaselineResult(genome.reshape(n, n), value, elapsed, method)


def weighted_scan(
    lambdas,
    mixtures,
    specs,
    cfg: spea2.EngineConfig,
    threshold: float,
    penalty: float,
) -> list[BaselineResult]:
    """One weighted-sum optimization per weight vector, with independent
    seeds derived from the configured engine seed."""
    lambdas = list(lambdas)
    if not lambdas:
        return []
    seeds = np.random.SeedSequence(cfg.seed).spawn(len(lambdas))
    results = []
    for lam, seq in zip(lambdas, seeds):
        sub_cfg = replace(cfg, seed=int(seq.generate_state(1, dtype=np.uint64)[0]))
        results.append(
            mono_optimize(specs, mixtures, sub_cfg, threshold, penalty, weights=lam)
        )
    return results


def mse_objective(w, sources, mixtures) -> float:
    """Mean squared reconstruction error E[sum_i (s_i - y_i)^2] for y = W x."""
    s = sources.data if isinstance(sources, SignalMatrix) else np.asarray(sources, dtype=float)
    x = mixtures.data if isinstance(mixtures, SignalMatrix) else np.asarray(mixtures, dtype=float)
    w = np.asarray(getattr(w, "w", w), dtype=float)
    residual = s - w @ x
    return float(np.mean(np.sum(residual * residual, axis=0)))


def mse_solution(sources, mixtures) -> BaselineResult:
    """Closed-form least-squares separation matrix (supervised benchmark)."""
    s = sources.data if isinstance(sources, SignalMatrix) else np.asarray(sources, dtype=float)
    x = mixtures.data if isinstance(mixtures, SignalMatrix) else np.asarray(mixtures, dtype=float)
    if s.shape[1] != x.shape[1]:
        raise ValueError(
            f"sources have {s.shape[1]} samples but mixtures have {x.shape[1]}"
        )
    t = x.shape[1]
    started = time.perf_counter()
    rxx = x @ x.T / t
    rsx = s @ x.T / t
    try:
        w = np.linalg.solve(rxx.T, rsx.T).T
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"mixture covariance is singular: {exc}") from exc
    elapsed = time.perf_counter() - started
    return BaselineResult(w, mse_objective(w, s, x), elapsed, "mse-closed-form")
