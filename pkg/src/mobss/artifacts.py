"""Persisted experiment outputs: run artifacts, evaluation reports, sweeps.

Everything is stored as canonical JSON (sorted keys, two-space indent,
floats via ``repr``) so that writing, reading and re-writing a document is
byte-identical and two runs with the same configuration and seed produce
identical artifacts except for the ``timings`` subtree. Infinite SIR values
are serialized as null plus a parallel boolean mask. The mixtures are kept
inside the run artifact so downstream consumers (evaluation, the explorer
service) never need the original data files.

CSV exports are plot-ready tables: comma delimiter, period decimal
separator, one header row, numeric cells only, so every emitted file can be
re-read by the signal ingestion path.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig
from .criteria import CriterionSpec, ObjectiveVector
from .evaluation import EvaluationReport
from .spea2 import Candidate, Snapshot

ARTIFACT_SCHEMA = "mobss-artifact/1"
REPORT_SCHEMA = "mobss-report/1"
SWEEP_SCHEMA = "mobss-sweep/1"


def dump_canonical(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(doc: dict, path) -> None:
    with open(path, "w") as fh:
        fh.write(dump_canonical(doc))


def read_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def encode_maybe_infinite(values) -> tuple[list, list]:
    """Split an array with possible +inf entries into (nullable values, mask)."""
    arr = np.asarray(values, dtype=float)
    mask = np.isinf(arr)
    nested = np.where(mask, 0.0, arr).tolist()

    def _nullify(vals, flags):
        if isinstance(vals, list):
            return [_nullify(v, f) for v, f in zip(vals, flags)]
        return None if flags else vals

    return _nullify(nested, mask.tolist()), mask.tolist()


def decode_maybe_infinite(values, mask) -> np.ndarray:
    arr = np.asarray(
        [[v if v is not None else 0.0 for v in row] if isinstance(row, list) else (row if row is not None else 0.0) for row in values],
        dtype=float,
    )
    return np.where(np.asarray(mask, dtype=bool), np.inf, arr)


@dataclass
class RunArtifact:
    """One persisted optimization run."""

    config: RunConfig
    detected_tau: int
    resolved_criteria: list[CriterionSpec]
    mixture_labels: list[str]
    mixtures: np.ndarray  # (channels, samples)
    final_archive: list[Candidate]
    snapshots: list[Snapshot]
    evaluations: int
    timings: dict = field(default_factory=dict)
    schema_version: str = ARTIFACT_SCHEMA

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "config": self.config.to_dict(),
            "detected_tau": int(self.detected_tau),
            "resolved_criteria": [
                {"id": s.id, "lag": s.lag} for s in self.resolved_criteria
            ],
            "mixtures": {
                "channel_labels": list(self.mixture_labels),
                "data": self.mixtures.tolist(),
            },
            "final_archive": [
                {
                    "genome": c.genome.tolist(),
                    "objectives": c.objectives.values.tolist(),
                    "penalized": bool(c.objectives.penalized),
                }
                for c in self.final_archive
            ],
            "snapshots": [
                {
                    "iteration": int(s.iteration),
                    "objectives": s.objectives.tolist(),
                    "penalized": s.penalized.tolist(),
                }
                for s in self.snapshots
            ],
            "evaluations": int(self.evaluations),
            "timings": dict(self.timings),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RunArtifact":
        if doc.get("schema_version") != ARTIFACT_SCHEMA:
            raise ValueError(
                f"unsupported artifact schema {doc.get('schema_version')!r}"
            )
        archive = [
            Candidate(
                np.asarray(entry["genome"], dtype=float),
                ObjectiveVector(entry["objectives"], bool(entry["penalized"])),
            )
            for entry in doc["final_archive"]
        ]
        snapshots = [
            Snapshot(
                iteration=int(entry["iteration"]),
                objectives=np.asarray(entry["objectives"], dtype=float),
                penalized=np.asarray(entry["penalized"], dtype=bool),
            )
            for entry in doc["snapshots"]
        ]
        return cls(
            config=RunConfig.from_dict(doc["config"]),
            detected_tau=int(doc["detected_tau"]),
            resolved_criteria=[
                CriterionSpec(e["id"], e["lag"]) for e in doc["resolved_criteria"]
            ],
            mixture_labels=list(doc["mixtures"]["channel_labels"]),
            mixtures=np.asarray(doc["mixtures"]["data"], dtype=float),
            final_archive=archive,
            snapshots=snapshots,
            evaluations=int(doc.get("evaluations", 0)),
            timings=dict(doc.get("timings", {})),
        )


def save_artifact(artifact: RunArtifact, path) -> None:
    write_json(artifact.to_dict(), path)


def load_artifact(path) -> RunArtifact:
    return RunArtifact.from_dict(read_json(path))


def artifact_bytes_without_timings(path) -> bytes:
    """Canonical bytes of an artifact with the timing subtree removed,
    for determinism comparisons."""
    doc = read_json(path)
    doc.pop("timings", None)
    return dump_canonical(doc).encode()


def report_to_dict(report: EvaluationReport, run_id: str | None = None) -> dict:
    table, table_mask = encode_maybe_infinite(report.per_solution_sir)
    combined, combined_mask = encode_maybe_infinite(report.combined_sir)
    mse, mse_mask = encode_maybe_infinite(report.mse_sir)
    mono = {}
    for name, values in report.mono_sir.items():
        vals, mask = encode_maybe_infinite(values)
        mono[name] = {"sir": vals, "sir_infinite": mask}
    return {
        "schema_version": REPORT_SCHEMA,
        "run_id": run_id,
        "order_by": int(report.order_by),
        "ordering": [int(i) for i in report.ordering],
        "best_index": int(report.best_index),
        "per_solution_sir": table,
        "per_solution_sir_infinite": table_mask,
        "objectives": report.objectives.tolist(),
        "penalized": report.penalized.tolist(),
        "combined": {
            "w": report.combined_w.tolist(),
            "sir": combined,
            "sir_infinite": combined_mask,
        },
        "mse": {"w": report.mse_w.tolist(), "sir": mse, "sir_infinite": mse_mask},
        "mono": mono,
    }


def report_from_dict(doc: dict) -> EvaluationReport:
    if doc.get("schema_version") != REPORT_SCHEMA:
        raise ValueError(f"unsupported report schema {doc.get('schema_version')!r}")
    mono = {
        name: decode_maybe_infinite(entry["sir"], entry["sir_infinite"])
        for name, entry in doc.get("mono", {}).items()
    }
    return EvaluationReport(
        per_solution_sir=decode_maybe_infinite(
            doc["per_solution_sir"], doc["per_solution_sir_infinite"]
        ),
        objectives=np.asarray(doc["objectives"], dtype=float),
        penalized=np.asarray(doc["penalized"], dtype=bool),
        ordering=[int(i) for i in doc["ordering"]],
        order_by=int(doc["order_by"]),
        best_index=int(doc["best_index"]),
        combined_w=np.asarray(doc["combined"]["w"], dtype=float),
        combined_sir=decode_maybe_infinite(
            doc["combined"]["sir"], doc["combined"]["sir_infinite"]
        ),
        mse_w=np.asarray(doc["mse"]["w"], dtype=float),
        mse_sir=decode_maybe_infinite(doc["mse"]["sir"], doc["mse"]["sir_infinite"]),
        mono_sir=mono,
    )


def save_report(report: EvaluationReport, path, run_id: str | None = None) -> None:
    write_json(report_to_dict(report, run_id), path)


def load_report(path) -> EvaluationReport:
    return report_from_dict(read_json(path))


@dataclass
class SweepResult:
    snr_grid_db: list[float]
    repetitions: int
    curves: dict[str, list[float]]  # one value per grid point, mean over seeds
    detected_tau: int
    failures: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        # Non-finite curve values (all-failed cells, perfect recovery) are
        # stored as null; decoding restores nan.
        return {
            "schema_version": SWEEP_SCHEMA,
            "snr_grid_db": [float(v) for v in self.snr_grid_db],
            "repetitions": int(self.repetitions),
            "curves": {
                k: [float(x) if np.isfinite(x) else None for x in v]
                for k, v in self.curves.items()
            },
            "detected_tau": int(self.detected_tau),
            "failures": list(self.failures),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SweepResult":
        if doc.get("schema_version") != SWEEP_SCHEMA:
            raise ValueError(f"unsupported sweep schema {doc.get('schema_version')!r}")
        return cls(
            snr_grid_db=[float(v) for v in doc["snr_grid_db"]],
            repetitions=int(doc["repetitions"]),
            curves={
                k: [float(x) if x is not None else float("nan") for x in v]
                for k, v in doc["curves"].items()
            },
            detected_tau=int(doc["detected_tau"]),
            failures=list(doc.get("failures", [])),
        )


def save_sweep(result: SweepResult, path) -> None:
    write_json(result.to_dict(), path)


def load_sweep(path) -> SweepResult:
    return SweepResult.from_dict(read_json(path))


# -- CSV export ---------------------------------------------------------

def _write_csv(path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])


def _objective_header(k: int) -> list[str]:
    return [f"j{i + 1}" for i in range(k)]


def write_front_csv(report: EvaluationReport, path) -> None:
    """Archive members in objective space with their averaged SIR."""
    k = report.objectives.shape[1]
    header = ["member", *_objective_header(k), "penalized", "mean_sir"]
    rows = [
        [m, *report.objectives[m], float(report.penalized[m]), report.mean_sir[m]]
        for m in range(report.objectives.shape[0])
    ]
    _write_csv(path, header, rows)


def write_benchmark_points_csv(points: list[ObjectiveVector], path) -> None:
    """Objective-space positions of reference solutions for the front plot.

    Row order is fixed by the caller (the report path writes the MSE point
    first, the combined solution second); the ``point`` column is the row
    index.
    """
    if not points:
        raise ValueError("need at least one benchmark point")
    k = points[0].values.size
    header = ["point", *_objective_header(k), "penalized"]
    rows = [[i, *p.values, float(p.penalized)] for i, p in enumerate(points)]
    _write_csv(path, header, rows)


def write_sir_curves_csv(report: EvaluationReport, path) -> None:
    """Per-source SIR of the archive ordered by the chosen criterion."""
    n = report.per_solution_sir.shape[1]
    header = [
        "position",
        "member",
        "order_criterion",
        *[f"sir_{i + 1}" for i in range(n)],
        "mean_sir",
    ]
    rows = []
    for pos, member in enumerate(report.ordering):
        rows.append(
            [
                pos,
                member,
                report.objectives[member, report.order_by],
                *report.per_solution_sir[member],
                report.mean_sir[member],
            ]
        )
    _write_csv(path, header, rows)


def write_estimates_csv(columns: dict[str, np.ndarray], path) -> None:
    """Waveform table: one named column per signal, one row per sample."""
    names = list(columns)
    length = len(next(iter(columns.values())))
    header = ["t", *names]
    rows = ([t, *[columns[name][t] for name in names]] for t in range(length))
    _write_csv(path, header, rows)


def write_convergence_csv(artifact: RunArtifact, path) -> None:
    """Long-format archive objective clouds, one row per snapshot member."""
    if len(artifact.snapshots) < 2:
        raise ValueError(
            f"need at least 2 snapshots for a convergence table, got {len(artifact.snapshots)}"
        )
    k = artifact.snapshots[0].objectives.shape[1]
    header = ["iteration", "member", *_objective_header(k), "penalized"]
    rows = []
    for snap in artifact.snapshots:
        for m in range(snap.objectives.shape[0]):
            rows.append([snap.iteration, m, *snap.objectives[m], float(snap.penalized[m])])
    _write_csv(path, header, rows)


def write_convergence_summary_csv(artifact: RunArtifact, path) -> None:
    """Per-snapshot archive size, penalized count and best objective values."""
    if len(artifact.snapshots) < 2:
        raise ValueError(
            f"need at least 2 snapshots for a convergence table, got {len(artifact.snapshots)}"
        )
    k = artifact.snapshots[0].objectives.shape[1]
    header = [
        "iteration",
        "archive_size",
        "penalized_count",
        *[f"best_j{i + 1}" for i in range(k)],
    ]
    rows = []
    for snap in artifact.snapshots:
        rows.append(
            [
                snap.iteration,
                snap.objectives.shape[0],
                int(snap.penalized.sum()),
                *snap.objectives.min(axis=0),
            ]
        )
    _write_csv(path, header, rows)


SWEEP_CSV_COLUMNS = ["snr", "best", "worst", "average", "mono_tc", "mono_sp", "mse", "combined"]


def write_sweep_csv(result: SweepResult, path) -> None:
    rows = []
    for i, snr in enumerate(result.snr_grid_db):
        rows.append([snr, *[result.curves[name][i] for name in SWEEP_CSV_COLUMNS[1:]]])
    _write_csv(path, SWEEP_CSV_COLUMNS, rows)
