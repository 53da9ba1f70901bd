"""Supervised quality metrics and archive scoring.

Estimates match sources only up to permutation, scale and sign, so every
comparison first pairs estimate channels with source channels (greedy on
|Pearson|), standardizes both sides and flips the estimate sign when the
correlation is negative. The signal-to-interference ratio is then
``10 log10(E[s^2] / E[(s - y)^2])`` in dB, with exact recovery reported as
an infinite sentinel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import baselines, criteria, signals
from .signals import SignalMatrix, SeparationMatrix, pearson, separate, standardize


def align(source, estimate) -> np.ndarray:
    """Standardize the estimate onto the source's scale and sign.

    Returns the standardized estimate, sign-flipped when its Pearson
    correlation with the source is negative. Compare against
    ``standardize(source)``.
    """
    s = standardize(source)
    y = standardize(estimate)
    if pearson(s, y) < 0.0:
        y = -y
    return y


def sir(source, estimate) -> float:
    """Signal-to-interference ratio in dB for an aligned source/estimate pair.

    Returns ``inf`` when the residual power is exactly zero.
    """
    s = np.asarray(source, dtype=float).ravel()
    y = np.asarray(estimate, dtype=float).ravel()
    if s.size != y.size:
        raise ValueError(f"length mismatch: {s.size} vs {y.size}")
    signal_power = float(np.mean(s * s))
    if signal_power == 0.0:
        raise ValueError("source has zero power")
    residual = s - y
    residual_power = float(np.mean(residual * residual))
    if residual_power == 0.0:
        return np.inf
    return 10.0 * np.log10(signal_power / residual_power)


def pair_sources(sources, estimates) -> tuple[int, ...]:
    """Greedy assignment of estimate channels to source channels.

    Repeatedly takes the highest remaining |Pearson| pair; entry ``i`` of
    the returned permutation is the estimate channel assigned to source
    channel ``i``.
    """
    s = sources.data if isinstance(sources, SignalMatrix) else np.asarray(sources, dtype=float)
    y = estimates.data if isinstance(estimates, SignalMatrix) else np.asarray(estimates, dtype=float)
    if s.shape[0] != y.shape[0]:
        raise ValueError(
            f"{s.shape[0]} sources against {y.shape[0]} estimates"
        )
    n = s.shape[0]
    scores = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            scores[i, j] = abs(pearson(s[i], y[j]))
    perm = [-1] * n
    free_sources = set(range(n))
    free_estimates = set(range(n))
    while free_sources:
        best = None
        for i in free_sources:
            for j in free_estimates:
                if best is None or scores[i, j] > scores[best]:
                    best = (i, j)
        perm[best[0]] = best[1]
        free_sources.remove(best[0])
        free_estimates.remove(best[1])
    return tuple(perm)


def per_source_sir(sources, estimates) -> np.ndarray:
    """Pair, align, and score every source against its matched estimate."""
    s = sources.data if isinstance(sources, SignalMatrix) else np.asarray(sources, dtype=float)
    y = estimates.data if isinstance(estimates, SignalMatrix) else np.asarray(estimates, dtype=float)
    perm = pair_sources(s, y)
    out = np.empty(s.shape[0])
    for i in range(s.shape[0]):
        out[i] = sir(standardize(s[i]), align(s[i], y[perm[i]]))
    return out


@dataclass
class EvaluationReport:
    """Per-solution SIR table plus orderings, combination and benchmarks."""

    per_solution_sir: np.ndarray  # (archive size, N) in dB
    objectives: np.ndarray  # (archive size, K)
    penalized: np.ndarray  # (archive size,) bool
    ordering: list[int]  # archive indices sorted by the chosen criterion
    order_by: int
    best_index: int  # maximizes row-mean SIR
    combined_w: np.ndarray
    combined_sir: np.ndarray
    mse_w: np.ndarray
    mse_sir: np.ndarray
    mono_sir: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def mean_sir(self) -> np.ndarray:
        return self.per_solution_sir.mean(axis=1)


def _archive_matrices(archive) -> list[np.ndarray]:
    """Accept engine candidates or plain (genome, ...) rows; yield W matrices."""
    mats = []
    for member in archive:
        genome = np.asarray(getattr(member, "genome", member), dtype=float).ravel()
        n = int(round(np.sqrt(genome.size)))
        if n * n != genome.size:
            raise ValueError(f"genome of length {genome.size} is not square")
        mats.append(genome.reshape(n, n))
    return mats


def evaluate_archive(
    archive,
    sources: SignalMatrix,
    mixtures: SignalMatrix,
    order_by: int = 0,
    mono_results: dict[str, baselines.BaselineResult] | None = None,
) -> EvaluationReport:
    """Score every archive member against the known sources.

    ``archive`` is a list of engine candidates (genome + objectives). The
    report orders members ascending by the chosen criterion, marks the
    member with the highest averaged SIR, and attaches the combined
    solution and the least-squares benchmark.
    """
    if not archive:
        raise ValueError("cannot evaluate an empty archive")
    mats = _archive_matrices(archive)
    objectives = np.array([np.asarray(m.objectives.values, dtype=float) for m in archive])
    penalized = np.array([bool(m.objectives.penalized) for m in archive])
    if not 0 <= order_by < objectives.shape[1]:
        raise ValueError(f"order_by {order_by} out of range for {objectives.shape[1]} criteria")

    table = np.empty((len(mats), sources.channel_count))
    for m, w in enumerate(mats):
        est = separate(mixtures, SeparationMatrix(w))
        table[m] = per_source_sir(sources, est)

    ordering = list(np.argsort(objectives[:, order_by], kind="stable"))
    best_index = int(np.argmax(table.mean(axis=1)))

    combined_w, combined = combine_best(archive, sources, mixtures)
    mse = baselines.mse_solution(sources, mixtures)
    mse_sir = per_source_sir(sources, mse.w @ mixtures.data)

    mono_sir = {}
    for name, result in (mono_results or {}).items():
        mono_sir[name] = per_source_sir(sources, result.w @ mixtures.data)

    return EvaluationReport(
        per_solution_sir=table,
        objectives=objectives,
        penalized=penalized,
        ordering=[int(i) for i in ordering],
        order_by=order_by,
        best_index=best_index,
        combined_w=combined_w,
        combined_sir=combined,
        mse_w=mse.w,
        mse_sir=mse_sir,
        mono_sir=mono_sir,
    )


def combine_best(archive, sources: SignalMatrix, mixtures: SignalMatrix):
    """Compose a separation matrix from the best row per source across the
    whole archive (supervised).

    For each source, every member's paired estimate is scored and the row
    achieving the highest SIR is copied into the composite; row ``i`` of the
    returned matrix estimates source ``i``.
    """
    if not archive:
        raise ValueError("cannot combine an empty archive")
    mats = _archive_matrices(archive)
    n = sources.channel_count
    best_sir = np.full(n, -np.inf)
    best_rows = [None] * n
    for w in mats:
        est = separate(mixtures, SeparationMatrix(w))
        perm = pair_sources(sources, est)
        for i in range(n):
            value = sir(standardize(sources.data[i]), align(sources.data[i], est.data[perm[i]]))
            if value > best_sir[i]:
                best_sir[i] = value
                best_rows[i] = w[perm[i]]
    composite = np.vstack(best_rows)
    return composite, best_sir


def user_combine(archive, picks) -> np.ndarray:
    """Assemble a composite separation matrix from explicit row picks.

    ``picks`` holds one ``(member index, row index)`` pair per output
    source, in output order. No supervision is used. Duplicate picks and
    out-of-range indices are rejected.
    """
    if not archive:
        raise ValueError("cannot combine an empty archive")
    mats = _archive_matrices(archive)
    n = mats[0].shape[0]
    picks = [tuple(int(v) for v in p) for p in picks]
    if len(picks) != n:
        raise ValueError(f"need exactly {n} picks (one per output source), got {len(picks)}")
    errors = []
    for member, row in picks:
        if not 0 <= member < len(mats):
            errors.append(f"member index {member} out of range [0, {len(mats) - 1}]")
        elif not 0 <= row < n:
            errors.append(f"row index {row} out of range [0, {n - 1}]")
    if len(set(picks)) != len(picks):
        errors.append("duplicate row picks")
    if errors:
        raise ValueError("; ".join(errors))
    return np.vstack([mats[member][row] for member, row in picks])
