"""SPEA2 evolutionary engine: fitness assignment, environmental selection
with nearest-neighbor truncation, binary tournament mating and real-coded
variation.

Fitness follows the strength/raw/density scheme: every candidate's strength
S is the number of pool members it dominates, its raw fitness R sums the
strengths of its dominators, and a density term 1/(sigma_k + 2) breaks ties
among non-dominated candidates, where sigma_k is the objective-space
distance to the k-th nearest neighbor and k = floor(sqrt(pool size)).
A candidate is non-dominated within its pool exactly when fitness < 1.

The run loop is deterministic for a fixed seed: all randomness flows from
one seeded generator consumed in a fixed order (initialization, then per
iteration mating and variation). Objective evaluation is pure and consumes
no randomness, so evaluation may be batched or parallelized freely without
changing the result.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .criteria import ObjectiveVector


@dataclass
class Candidate:
    """A flattened separation-matrix genome with its evaluation state."""

    genome: np.ndarray
    objectives: ObjectiveVector | None = None
    fitness: float = math.inf
    density_distance: float = math.inf

    def __post_init__(self):
        self.genome = np.asarray(self.genome, dtype=float).ravel()


@dataclass
class EngineConfig:
    population_size: int = 100
    archive_size: int = 50
    max_iterations: int = 60
    crossover_rate: float = 0.5
    mutation_sigma: float = 0.25
    genome_bounds: tuple[float, float] = (-2.0, 2.0)
    genome_length: int = 4
    seed: int = 0

    def validation_errors(self) -> list[str]:
        errors = []
        if self.population_size < 1:
            errors.append(f"population_size must be >= 1, got {self.population_size}")
        if self.archive_size < 1:
            errors.append(f"archive_size must be >= 1, got {self.archive_size}")
        if self.archive_size > self.population_size:
            errors.append(
                f"archive_size {self.archive_size} exceeds population_size "
                f"{self.population_size}"
            )
        if self.max_iterations < 1:
            errors.append(f"max_iterations must be >= 1, got {self.max_iterations}")
        if not 0.0 <= self.crossover_rate <= 1.0:
            errors.append(f"crossover_rate must lie in [0, 1], got {self.crossover_rate}")
        if self.mutation_sigma <= 0.0:
            errors.append(f"mutation_sigma must be positive, got {self.mutation_sigma}")
        lo, hi = self.genome_bounds
        if not lo < hi:
            errors.append(f"degenerate genome_bounds {self.genome_bounds}")
        if self.genome_length < 1:
            errors.append(f"genome_length must be >= 1, got {self.genome_length}")
        if self.seed < 0:
            errors.append(f"seed must be unsigned, got {self.seed}")
        return errors

    def validate(self) -> None:
        errors = self.validation_errors()
        if errors:
            raise ValueError("; ".join(errors))


@dataclass
class Snapshot:
    """Archive state recorded at one iteration."""

    iteration: int
    objectives: np.ndarray  # (archive size, K)
    penalized: np.ndarray  # (archive size,) bool


@dataclass
class EngineResult:
    """Output of one engine run; wrapped into a run artifact by the harness."""

    archive: list[Candidate]
    snapshots: list[Snapshot]
    iterations: int
    evaluations: int
    iteration_seconds: list[float] = field(default_factory=list)
    total_seconds: float = 0.0


class EvaluationError(RuntimeError):
    """Evaluator failure, annotated with iteration and candidate index."""

    def __init__(self, iteration: int, index: int, cause: BaseException):
        super().__init__(
            f"objective evaluation failed at iteration {iteration}, "
            f"candidate {index}: {cause}"
        )
        self.iteration = iteration
        self.index = index


def dominates(a, b) -> bool:
    """Pareto dominance for minimization: a is no worse everywhere and
    strictly better somewhere."""
    av = np.asarray(getattr(a, "values", a), dtype=float).ravel()
    bv = np.asarray(getattr(b, "values", b), dtype=float).ravel()
    if av.size != bv.size:
        raise ValueError(f"objective length mismatch: {av.size} vs {bv.size}")
    return bool(np.all(av <= bv) and np.any(av < bv))


def init_population(cfg: EngineConfig, rng: np.random.Generator | None = None) -> list[Candidate]:
    """B candidates with genomes uniform in the configured bounds."""
    cfg.validate()
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    lo, hi = cfg.genome_bounds
    genomes = rng.uniform(lo, hi, size=(cfg.population_size, cfg.genome_length))
    return [Candidate(g) for g in genomes]


def _objective_matrix(pool: list[Candidate]) -> np.ndarray:
    return np.array([c.objectives.values for c in pool])


def _dominance_matrix(f: np.ndarray) -> np.ndarray:
    """Boolean matrix where entry (i, j) says row i dominates row j."""
    le = (f[:, None, :] <= f[None, :, :]).all(axis=2)
    lt = (f[:, None, :] < f[None, :, :]).any(axis=2)
    return le & lt


def assign_fitness(pool: list[Candidate]) -> list[Candidate]:
    """Compute strength/raw/density fitness for every candidate in the pool."""
    if not pool:
        raise ValueError("cannot assign fitness to an empty pool")
    f = _objective_matrix(pool)
    n = len(pool)
    dom = _dominance_matrix(f)
    strength = dom.sum(axis=1)
    raw = (dom * strength[:, None]).sum(axis=0)

    if n == 1:
        pool[0].fitness = float(raw[0])
        pool[0].density_distance = math.inf
        return pool

    dists = np.linalg.norm(f[:, None, :] - f[None, :, :], axis=2)
    np.fill_diagonal(dists, np.inf)
    sorted_dists = np.sort(dists, axis=1)
    k = min(max(1, int(math.isqrt(n))), n - 1)
    sigma = sorted_dists[:, k - 1]
    density = 1.0 / (sigma + 2.0)
    for i, cand in enumerate(pool):
        cand.fitness = float(raw[i] + density[i])
        cand.density_distance = float(sigma[i])
    return pool


def _truncate(nondominated: list[Candidate], cap: int) -> list[Candidate]:
    # Iteratively drop the candidate with the smallest distance to its
    # nearest neighbor; ties fall through to next-nearest distances.
    # Only rows achieving the global minimum distance can be the
    # lexicographic minimum, so full sorts are confined to those rows.
    f = _objective_matrix(nondominated)
    dists = np.linalg.norm(f[:, None, :] - f[None, :, :], axis=2)
    np.fill_diagonal(dists, np.inf)
    alive = np.ones(len(nondominated), dtype=bool)
    count = len(nondominated)
    while count > cap:
        idx = np.flatnonzero(alive)
        sub = dists[np.ix_(idx, idx)]
        row_min = sub.min(axis=1)
        tied = np.flatnonzero(row_min == row_min.min())
        if tied.size == 1:
            drop = tied[0]
        else:
            rows = np.sort(sub[tied], axis=1)
            order = np.lexsort(rows.T[::-1])
            drop = tied[order[0]]
        alive[idx[drop]] = False
        count -= 1
    return [nondominated[i] for i in np.flatnonzero(alive)]


def environmental_selection(pool: list[Candidate], archive_size: int) -> list[Candidate]:
    """Select the next archive: all non-dominated candidates, truncated by
    nearest-neighbor distance when too many, padded with the best dominated
    candidates (ascending fitness) when too few."""
    if archive_size <= 0:
        raise ValueError(f"archive size must be positive, got {archive_size}")
    nondominated = [c for c in pool if c.fitness < 1.0]
    if len(nondominated) > archive_size:
        return _truncate(nondominated, archive_size)
    if len(nondominated) < archive_size:
        dominated = sorted(
            (c for c in pool if c.fitness >= 1.0), key=lambda c: c.fitness
        )
        return nondominated + dominated[: archive_size - len(nondominated)]
    return list(nondominated)


def binary_tournament(
    archive: list[Candidate], count: int, rng: np.random.Generator
) -> list[Candidate]:
    """Draw ``count`` winners; each samples two members with replacement and
    keeps the lower fitness (first drawn wins ties)."""
    if not archive:
        raise ValueError("cannot run a tournament on an empty archive")
    pairs = rng.integers(0, len(archive), size=(count, 2))
    return [
        archive[i] if archive[i].fitness <= archive[j].fitness else archive[j]
        for i, j in pairs
    ]


def crossover(p1: Candidate, p2: Candidate, rng: np.random.Generator) -> Candidate:
    """Whole-arithmetic blend with one uniform weight per child."""
    if p1.genome.size != p2.genome.size:
        raise ValueError("parent genome lengths differ")
    u = rng.uniform()
    return Candidate(u * p1.genome + (1.0 - u) * p2.genome)


def mutate(p: Candidate, sigma: float, bounds: tuple[float, float], rng: np.random.Generator) -> Candidate:
    """Per-gene Gaussian perturbation, clamped to the genome bounds."""
    genome = p.genome + sigma * rng.standard_normal(p.genome.size)
    return Candidate(np.clip(genome, bounds[0], bounds[1]))


def _evaluate_population(
    population: list[Candidate], evaluator, iteration: int, workers: int | None
) -> int:
    pending = [(i, c) for i, c in enumerate(population) if c.objectives is None]
    if not pending:
        return 0
    batch = getattr(evaluator, "batch", None)
    if batch is not None:
        genomes = np.array([c.genome for _, c in pending])
        try:
            results = batch(genomes)
        except Exception as exc:  # report the first candidate of the batch
            raise EvaluationError(iteration, pending[0][0], exc) from exc
        for (_, cand), obj in zip(pending, results):
            cand.objectives = obj
    elif workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            futures = [(i, c, executor.submit(evaluator, c.genome)) for i, c in pending]
            for i, cand, fut in futures:
                try:
                    cand.objectives = fut.result()
                except Exception as exc:
                    raise EvaluationError(iteration, i, exc) from exc
    else:
        for i, cand in pending:
            try:
                cand.objectives = evaluator(cand.genome)
            except Exception as exc:
                raise EvaluationError(iteration, i, exc) from exc
    return len(pending)


def run(
    cfg: EngineConfig,
    evaluator,
    snapshot_every: int = 1,
    workers: int | None = None,
) -> EngineResult:
    """Execute the full evolutionary loop for ``cfg.max_iterations``.

    Each iteration evaluates the population, assigns fitness over the
    union of population and archive, applies environmental selection, and
    breeds the next population from binary-tournament winners:
    ceil(crossover_rate * B) crossover children, the rest mutation children.
    Archive snapshots are recorded every ``snapshot_every`` iterations (the
    final iteration is always recorded); the returned archive keeps only
    mutually non-dominated members.
    """
    cfg.validate()
    if snapshot_every < 1:
        raise ValueError(f"snapshot_every must be >= 1, got {snapshot_every}")
    ev_len = getattr(evaluator, "genome_length", None)
    if ev_len is not None and ev_len != cfg.genome_length:
        raise ValueError(
            f"evaluator expects genomes of length {ev_len}, config says {cfg.genome_length}"
        )

    rng = np.random.default_rng(cfg.seed)
    population = init_population(cfg, rng)
    archive: list[Candidate] = []
    snapshots: list[Snapshot] = []
    iteration_seconds: list[float] = []
    evaluations = 0
    started = time.perf_counter()

    n_cross = math.ceil(cfg.crossover_rate * cfg.population_size)
    n_mut = cfg.population_size - n_cross

    for iteration in range(1, cfg.max_iterations + 1):
        tick = time.perf_counter()
        evaluations += _evaluate_population(population, evaluator, iteration, workers)
        pool = population + archive
        assign_fitness(pool)
        archive = environmental_selection(pool, cfg.archive_size)

        if iteration % snapshot_every == 0 or iteration == cfg.max_iterations:
            snapshots.append(
                Snapshot(
                    iteration=iteration,
                    objectives=_objective_matrix(archive),
                    penalized=np.array([c.objectives.penalized for c in archive]),
                )
            )

        if iteration < cfg.max_iterations:
            winners = binary_tournament(archive, 2 * n_cross + n_mut, rng)
            children = [
                crossover(winners[2 * i], winners[2 * i + 1], rng) for i in range(n_cross)
            ]
            children += [
                mutate(winners[2 * n_cross + j], cfg.mutation_sigma, cfg.genome_bounds, rng)
                for j in range(n_mut)
            ]
            population = children
        iteration_seconds.append(time.perf_counter() - tick)

    dom = _dominance_matrix(_objective_matrix(archive))
    final = [archive[i] for i in np.flatnonzero(~dom.any(axis=0))]
    return EngineResult(
        archive=final,
        snapshots=snapshots,
        iterations=cfg.max_iterations,
        evaluations=evaluations,
        iteration_seconds=iteration_seconds,
        total_seconds=time.perf_counter() - started,
    )
