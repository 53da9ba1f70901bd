"""Experiment pipelines: single runs, report evaluation and the SNR sweep.

A run builds the sources (synthetic generators or CSV), mixes them,
detects the time-correlation lag from the configured mixture channel,
executes the evolutionary engine and packages everything into a run
artifact. The sweep repeats the noisy experiment over an SNR grid with
independently derived seeds per cell and aggregates mean SIR curves for
the archive (best/worst/average), the mono baselines, the least-squares
benchmark and the combined solution.
"""

from __future__ import annotations

import time
from dataclasses import replace

import numpy as np

from . import baselines, evaluation, signals
from .artifacts import RunArtifact, SweepResult
from .config import ConfigError, DataConfig, RunConfig
from .criteria import CriterionSpec, ObjectiveEvaluator
from .signals import MixingConfig, SignalMatrix
from . import spea2

MONO_CURVE_KEYS = {
    "time-correlation": "mono_tc",
    "sparsity": "mono_sp",
    "decorrelation": "mono_dc",
}


def build_sources(data: DataConfig) -> SignalMatrix:
    """Materialize the source signals described by the data section."""
    if data.kind == "csv":
        return signals.load_signals(data.path)
    channels = []
    labels = []
    seeds = np.random.SeedSequence(data.seed).spawn(len(data.generators))
    for kind, seq in zip(data.generators, seeds):
        seed = int(seq.generate_state(1, dtype=np.uint64)[0])
        one = signals.synth_sources(kind, data.period, data.samples, seed)
        channels.append(one.data[0])
        labels.append(f"{kind}-{len(labels) + 1}")
    coupled = signals.couple_channels(np.vstack(channels), data.coupling)
    return SignalMatrix(coupled, labels)


def mixing_config(cfg: RunConfig, snr_db: float | None = ..., noise_seed: int | None = None) -> MixingConfig:
    return MixingConfig(
        mixing_matrix=np.asarray(cfg.mixing.matrix, dtype=float),
        snr_db=cfg.mixing.snr_db if snr_db is ... else snr_db,
        noise_seed=cfg.mixing.noise_seed if noise_seed is None else noise_seed,
    )


def detect_tau(cfg: RunConfig, mixtures: SignalMatrix) -> int:
    tau_cfg = cfg.tau
    if tau_cfg.channel_index >= mixtures.channel_count:
        raise ConfigError(
            [
                f"tau.channel_index: {tau_cfg.channel_index} out of range for "
                f"{mixtures.channel_count} mixture channels"
            ]
        )
    if tau_cfg.max_lag >= mixtures.sample_count:
        raise ConfigError(
            [f"tau.max_lag: {tau_cfg.max_lag} must be below sample count {mixtures.sample_count}"]
        )
    return signals.detect_delay(
        mixtures.data[tau_cfg.channel_index], tau_cfg.min_lag, tau_cfg.max_lag
    )


def resolve_criteria(cfg: RunConfig, detected_tau: int) -> list[CriterionSpec]:
    return [c.resolve(detected_tau) for c in cfg.criteria]


def engine_config_for(cfg: RunConfig, channels: int, seed: int | None = None) -> spea2.EngineConfig:
    """Engine config with the genome length derived from the problem size."""
    engine = replace(cfg.engine, genome_length=channels * channels)
    if seed is not None:
        engine = replace(engine, seed=seed)
    return engine


def run_experiment(cfg: RunConfig, workers: int | None = None) -> RunArtifact:
    """Execute one full optimization run described by the configuration."""
    cfg.validate()
    started = time.perf_counter()
    sources = build_sources(cfg.data)
    mixtures = signals.mix(sources, mixing_config(cfg))

    tick = time.perf_counter()
    detected = detect_tau(cfg, mixtures)
    tau_seconds = time.perf_counter() - tick

    specs = resolve_criteria(cfg, detected)
    evaluator = ObjectiveEvaluator(
        mixtures, specs, cfg.feasibility.threshold, cfg.feasibility.penalty
    )
    engine_cfg = engine_config_for(cfg, mixtures.channel_count)
    result = spea2.run(engine_cfg, evaluator, cfg.snapshot_every, workers=workers)

    return RunArtifact(
        config=cfg,
        detected_tau=detected,
        resolved_criteria=specs,
        mixture_labels=mixtures.channel_labels,
        mixtures=mixtures.data,
        final_archive=result.archive,
        snapshots=result.snapshots,
        evaluations=result.evaluations,
        timings={
            "tau_detection_seconds": tau_seconds,
            "engine_seconds": result.total_seconds,
            "per_iteration_seconds": result.iteration_seconds,
            "total_seconds": time.perf_counter() - started,
        },
    )


def mono_baselines(
    cfg: RunConfig,
    mixtures: SignalMatrix,
    specs: list[CriterionSpec],
    seed: int | None = None,
) -> dict[str, baselines.BaselineResult]:
    """One mono-objective engine run per configured criterion."""
    base_seed = cfg.engine.seed if seed is None else seed
    seeds = np.random.SeedSequence(base_seed).spawn(len(specs))
    results = {}
    for spec, seq in zip(specs, seeds):
        engine_cfg = engine_config_for(
            cfg, mixtures.channel_count, seed=int(seq.generate_state(1, dtype=np.uint64)[0])
        )
        results[spec.id] = baselines.mono_optimize(
            spec, mixtures, engine_cfg, cfg.feasibility.threshold, cfg.feasibility.penalty
        )
    return results


def evaluate_artifact(
    artifact: RunArtifact,
    sources: SignalMatrix,
    order_by: int = 0,
    with_mono: bool = True,
) -> evaluation.EvaluationReport:
    """Score an artifact's archive against known sources."""
    mixtures = SignalMatrix(artifact.mixtures, artifact.mixture_labels)
    if sources.channel_count != mixtures.channel_count:
        raise ValueError(
            f"{sources.channel_count} source channels against "
            f"{mixtures.channel_count} mixture channels"
        )
    if sources.sample_count != mixtures.sample_count:
        raise ValueError(
            f"sources have {sources.sample_count} samples, mixtures {mixtures.sample_count}"
        )
    mono = None
    if with_mono:
        mono = mono_baselines(artifact.config, mixtures, artifact.resolved_criteria)
    return evaluation.evaluate_archive(
        artifact.final_archive, sources, mixtures, order_by=order_by, mono_results=mono
    )


def _cell_seeds(master_seed: int, snr_index: int, repetition: int) -> tuple[int, int, int]:
    words = np.random.SeedSequence(
        entropy=master_seed, spawn_key=(snr_index, repetition)
    ).generate_state(3, dtype=np.uint64)
    return int(words[0]), int(words[1]), int(words[2])


def sweep_cell(
    cfg: RunConfig,
    sources: SignalMatrix,
    specs: list[CriterionSpec],
    snr_db: float,
    noise_seed: int,
    engine_seed: int,
    mono_seed: int,
) -> dict[str, float]:
    """One (SNR, repetition) cell: noisy mixtures, MO run, baselines, SIR."""
    mixtures = signals.mix(sources, mixing_config(cfg, snr_db=snr_db, noise_seed=noise_seed))
    evaluator = ObjectiveEvaluator(
        mixtures, specs, cfg.feasibility.threshold, cfg.feasibility.penalty
    )
    engine_cfg = engine_config_for(cfg, mixtures.channel_count, seed=engine_seed)
    result = spea2.run(engine_cfg, evaluator, snapshot_every=engine_cfg.max_iterations)

    member_means = []
    for cand in result.archive:
        w = cand.genome.reshape(mixtures.channel_count, mixtures.channel_count)
        member_means.append(float(np.mean(evaluation.per_source_sir(sources, w @ mixtures.data))))
    member_means = np.asarray(member_means)

    cell = {
        "best": float(member_means.max()),
        "worst": float(member_means.min()),
        "average": float(member_means.mean()),
    }
    for spec_id, result_ in mono_baselines(cfg, mixtures, specs, seed=mono_seed).items():
        key = MONO_CURVE_KEYS[spec_id]
        cell[key] = float(
            np.mean(evaluation.per_source_sir(sources, result_.w @ mixtures.data))
        )
    mse = baselines.mse_solution(sources, mixtures)
    cell["mse"] = float(np.mean(evaluation.per_source_sir(sources, mse.w @ mixtures.data)))
    _, combined_sir = evaluation.combine_best(result.archive, sources, mixtures)
    cell["combined"] = float(np.mean(combined_sir))
    return cell


def snr_sweep(
    cfg: RunConfig,
    grid_db: list[float] | None = None,
    repetitions: int | None = None,
    progress=None,
) -> SweepResult:
    """Run the full noise-robustness protocol.

    The time-correlation lag is resolved once from the noise-free mixtures
    (explicit config lags win); each (SNR, repetition) cell then draws its
    own noise and engine seeds derived from the master engine seed. Cell
    failures are recorded and skipped by the aggregation; the sweep only
    fails when everything failed.
    """
    cfg.validate()
    grid = [float(v) for v in (grid_db if grid_db is not None else cfg.sweep.snr_grid_db)]
    reps = int(repetitions if repetitions is not None else cfg.sweep.repetitions)
    if not grid:
        raise ConfigError(["sweep.snr_grid_db: must not be empty"])
    if reps < 1:
        raise ConfigError([f"sweep.repetitions: must be >= 1, got {reps}"])

    sources = build_sources(cfg.data)
    clean = signals.mix(sources, mixing_config(cfg, snr_db=None))
    needs_detection = any(
        c.id == "time-correlation" and c.lag is None for c in cfg.criteria
    )
    detected = detect_tau(cfg, clean) if needs_detection else 0
    specs = resolve_criteria(cfg, detected)
    tau_for_record = next(
        (s.lag for s in specs if s.id == "time-correlation"), detected
    )

    curve_names = ["best", "worst", "average"]
    curve_names += [MONO_CURVE_KEYS[s.id] for s in specs]
    curve_names += ["mse", "combined"]
    sums = {name: np.zeros(len(grid)) for name in curve_names}
    counts = np.zeros(len(grid), dtype=int)
    failures = []

    for si, snr in enumerate(grid):
        for rep in range(reps):
            noise_seed, engine_seed, mono_seed = _cell_seeds(cfg.engine.seed, si, rep)
            try:
                cell = sweep_cell(cfg, sources, specs, snr, noise_seed, engine_seed, mono_seed)
            except Exception as exc:
                failures.append({"snr_db": snr, "repetition": rep, "error": str(exc)})
                continue
            for name in curve_names:
                sums[name][si] += cell[name]
            counts[si] += 1
            if progress is not None:
                progress(si, rep)

    if counts.sum() == 0:
        raise RuntimeError(f"every sweep cell failed ({len(failures)} failures)")
    curves = {}
    for name in curve_names:
        with np.errstate(invalid="ignore"):
            curves[name] = list(np.where(counts > 0, sums[name] / np.maximum(counts, 1), np.nan))
    return SweepResult(
        snr_grid_db=grid,
        repetitions=reps,
        curves=curves,
        detected_tau=int(tau_for_record or 0),
        failures=failures,
    )
