"""Run configuration: the full description of one separation experiment.

Defaults reproduce the reference experimental setup: a 2x2 mixing matrix
[[1, 0.5], [0.5, 1]] over one spike-train source and one band-limited
source, time-correlation + sparsity criteria with the lag auto-detected
from the second mixture's autocorrelation, a feasibility threshold of 0.2
with penalty 1e5, and engine parameters B=100, archive 50, 60 iterations,
crossover rate 0.5.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .criteria import CRITERION_IDS, CriterionSpec
from .spea2 import EngineConfig

SCHEMA_VERSION = "mobss/1"


class ConfigError(ValueError):
    """Invalid configuration; carries one message per violated field."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


@dataclass
class CriterionConfig:
    """Criterion entry as configured; lag may be left unset for
    time-correlation, in which case it is detected at run time."""

    id: str
    lag: int | None = None

    def resolve(self, detected_tau: int) -> CriterionSpec:
        if self.id == "time-correlation":
            return CriterionSpec(self.id, self.lag if self.lag is not None else detected_tau)
        return CriterionSpec(self.id)


@dataclass
class FeasibilityConfig:
    threshold: float = 0.2
    penalty: float = 1.0e5


@dataclass
class DataConfig:
    """Source descriptor: synthetic generator parameters or a CSV path.

    The spike-train source comes second so its temporal structure dominates
    the second mixture, where the lag detection looks by default.
    """

    kind: str = "synthetic"  # "synthetic" | "csv"
    generators: list[str] = field(default_factory=lambda: ["smooth", "ecg-like"])
    period: int = 193
    samples: int = 4096
    seed: int = 1234
    coupling: float = 0.12  # shared-baseline bleed of channel 1 into the rest
    path: str | None = None


@dataclass
class MixingSection:
    matrix: list[list[float]] = field(default_factory=lambda: [[1.0, 0.5], [0.5, 1.0]])
    snr_db: float | None = None
    noise_seed: int = 5678


@dataclass
class TauDetectionConfig:
    """Where and how the time-correlation lag is detected; the channel
    default points at the second mixture."""

    channel_index: int = 1
    min_lag: int = 50
    max_lag: int = 600


@dataclass
class SweepConfig:
    snr_grid_db: list[float] = field(default_factory=lambda: [float(v) for v in range(5, 55, 5)])
    repetitions: int = 100


@dataclass
class RunConfig:
    engine: EngineConfig = field(default_factory=EngineConfig)
    criteria: list[CriterionConfig] = field(
        default_factory=lambda: [
            CriterionConfig("time-correlation"),
            CriterionConfig("sparsity"),
        ]
    )
    feasibility: FeasibilityConfig = field(default_factory=FeasibilityConfig)
    data: DataConfig = field(default_factory=DataConfig)
    mixing: MixingSection = field(default_factory=MixingSection)
    tau: TauDetectionConfig = field(default_factory=TauDetectionConfig)
    snapshot_every: int = 5
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def validation_errors(self) -> list[str]:
        errors = [f"engine.{msg}" for msg in self.engine.validation_errors()]
        if not self.criteria:
            errors.append("criteria: need at least one criterion")
        for i, crit in enumerate(self.criteria):
            if crit.id not in CRITERION_IDS:
                errors.append(f"criteria[{i}].id: unknown criterion {crit.id!r}")
            if crit.lag is not None and crit.lag < 1:
                errors.append(f"criteria[{i}].lag: must be positive, got {crit.lag}")
            if crit.lag is not None and crit.id != "time-correlation":
                errors.append(f"criteria[{i}].lag: {crit.id!r} takes no lag")
        if not 0.0 < self.feasibility.threshold < 1.0:
            errors.append(
                f"feasibility.threshold: must lie in (0, 1), got {self.feasibility.threshold}"
            )
        if self.feasibility.penalty <= 0.0:
            errors.append(f"feasibility.penalty: must be positive, got {self.feasibility.penalty}")
        if self.data.kind not in ("synthetic", "csv"):
            errors.append(f"data.kind: expected 'synthetic' or 'csv', got {self.data.kind!r}")
        if self.data.kind == "synthetic":
            if self.data.period < 1:
                errors.append(f"data.period: must be positive, got {self.data.period}")
            if self.data.samples < 4 * self.data.period:
                errors.append(
                    f"data.samples: need >= 4 * period, got {self.data.samples}"
                )
            if not self.data.generators:
                errors.append("data.generators: need at least one generator")
            if not 0.0 <= self.data.coupling < 1.0:
                errors.append(
                    f"data.coupling: must lie in [0, 1), got {self.data.coupling}"
                )
        if self.data.kind == "csv" and not self.data.path:
            errors.append("data.path: required for csv data")
        matrix = np.asarray(self.mixing.matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            errors.append(f"mixing.matrix: must be square, got shape {matrix.shape}")
        if self.mixing.snr_db is not None and not 0.0 < self.mixing.snr_db <= 100.0:
            errors.append(f"mixing.snr_db: must lie in (0, 100], got {self.mixing.snr_db}")
        if self.tau.channel_index < 0:
            errors.append(f"tau.channel_index: must be >= 0, got {self.tau.channel_index}")
        if not 1 <= self.tau.min_lag < self.tau.max_lag:
            errors.append(
                f"tau: need 1 <= min_lag < max_lag, got [{self.tau.min_lag}, {self.tau.max_lag}]"
            )
        if self.data.kind == "synthetic" and self.tau.max_lag >= self.data.samples:
            errors.append(
                f"tau.max_lag: {self.tau.max_lag} must be below data.samples {self.data.samples}"
            )
        if self.snapshot_every < 1:
            errors.append(f"snapshot_every: must be >= 1, got {self.snapshot_every}")
        if not self.sweep.snr_grid_db:
            errors.append("sweep.snr_grid_db: must not be empty")
        if any(not 0.0 < v <= 100.0 for v in self.sweep.snr_grid_db):
            errors.append("sweep.snr_grid_db: all values must lie in (0, 100]")
        if self.sweep.repetitions < 1:
            errors.append(f"sweep.repetitions: must be >= 1, got {self.sweep.repetitions}")
        return errors

    def validate(self) -> None:
        errors = self.validation_errors()
        if errors:
            raise ConfigError(errors)

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, engine=replace(self.engine, seed=seed))

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["engine"]["genome_bounds"] = list(self.engine.genome_bounds)
        return {"schema_version": SCHEMA_VERSION, **doc}

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        doc = dict(doc)
        doc.pop("schema_version", None)
        known = {"engine", "criteria", "feasibility", "data", "mixing", "tau", "snapshot_every", "sweep"}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError([f"unknown config fields: {sorted(unknown)}"])
        try:
            engine_doc = dict(doc.get("engine", {}))
            if "genome_bounds" in engine_doc:
                engine_doc["genome_bounds"] = tuple(engine_doc["genome_bounds"])
            cfg = cls(
                engine=EngineConfig(**engine_doc),
                criteria=[CriterionConfig(**c) for c in doc.get("criteria", [])]
                or cls().criteria,
                feasibility=FeasibilityConfig(**doc.get("feasibility", {})),
                data=DataConfig(**doc.get("data", {})),
                mixing=MixingSection(**doc.get("mixing", {})),
                tau=TauDetectionConfig(**doc.get("tau", {})),
                snapshot_every=doc.get("snapshot_every", cls().snapshot_every),
                sweep=SweepConfig(**doc.get("sweep", {})),
            )
        except TypeError as exc:
            raise ConfigError([f"malformed config: {exc}"]) from exc
        return cfg


def load_config(path) -> RunConfig:
    """Read and validate a JSON run configuration."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"{path}: not valid JSON: {exc}"]) from exc
    cfg = RunConfig.from_dict(doc)
    cfg.validate()
    return cfg


def save_config(cfg: RunConfig, path) -> None:
    with open(path, "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
