"""Command-line entry point.

Subcommands::

    mobss run         --config cfg.json --out runs/ [--seed N]
    mobss evaluate    --artifact runs/x.run.json --sources s.csv [--out dir]
    mobss sweep       --config cfg.json --out runs/ [--seed N]
    mobss convergence --artifact runs/x.run.json [--out dir]
    mobss serve       --dir runs/ --port 8765

Exit codes: 0 success, 1 validation error, 2 runtime error. Every report
command writes CSV tables and matplotlib figures side by side.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import artifacts, criteria, evaluation, experiment, plotting, server, signals
from .config import ConfigError, RunConfig, load_config, save_config
from .signals import SignalMatrix


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mobss", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute one optimization run")
    run.add_argument("--config", type=Path, help="run configuration JSON (defaults apply if omitted)")
    run.add_argument("--out", type=Path, default=Path("runs"), help="output directory")
    run.add_argument("--seed", type=int, help="override the engine seed")
    run.add_argument("--name", help="artifact base name (default: config stem)")

    ev = sub.add_parser("evaluate", help="score an artifact against known sources")
    ev.add_argument("--artifact", type=Path, required=True)
    ev.add_argument("--sources", type=Path, required=True, help="sources CSV")
    ev.add_argument("--out", type=Path, help="output directory (default: artifact directory)")
    ev.add_argument("--order-by", type=int, default=0, help="criterion index for the ordering")
    ev.add_argument("--no-mono", action="store_true", help="skip the mono-objective baselines")

    sw = sub.add_parser("sweep", help="run the SNR sweep protocol")
    sw.add_argument("--config", type=Path)
    sw.add_argument("--out", type=Path, default=Path("runs"))
    sw.add_argument("--seed", type=int, help="override the master seed")
    sw.add_argument("--name", help="output base name (default: config stem)")

    cv = sub.add_parser("convergence", help="export snapshot clouds from an artifact")
    cv.add_argument("--artifact", type=Path, required=True)
    cv.add_argument("--out", type=Path, help="output directory (default: artifact directory)")

    srv = sub.add_parser("serve", help="serve artifacts for the front explorer")
    srv.add_argument("--dir", type=Path, required=True, help="artifact directory")
    srv.add_argument("--port", type=int, default=8765)

    ex = sub.add_parser("init-config", help="write the default configuration")
    ex.add_argument("--out", type=Path, default=Path("mobss-config.json"))
    return parser


def _load_or_default(path: Path | None, seed: int | None) -> RunConfig:
    cfg = load_config(path) if path else RunConfig()
    if seed is not None:
        cfg = cfg.with_seed(seed)
    cfg.validate()
    return cfg


def _base_name(args) -> str:
    if getattr(args, "name", None):
        return args.name
    if getattr(args, "config", None):
        return Path(args.config).stem
    return "default"


def cmd_run(args) -> int:
    cfg = _load_or_default(args.config, args.seed)
    artifact = experiment.run_experiment(cfg)
    args.out.mkdir(parents=True, exist_ok=True)
    name = _base_name(args)
    path = args.out / f"{name}.run.json"
    artifacts.save_artifact(artifact, path)
    print(f"wrote {path} (archive {len(artifact.final_archive)}, tau {artifact.detected_tau})")
    if cfg.data.kind == "synthetic":
        sources_path = args.out / f"{name}.sources.csv"
        signals.save_signals(experiment.build_sources(cfg.data), sources_path)
        print(f"wrote {sources_path}")
    return 0


def _aligned_estimate_columns(
    artifact: artifacts.RunArtifact, report, sources: SignalMatrix
) -> dict[str, np.ndarray]:
    mixtures = SignalMatrix(artifact.mixtures, artifact.mixture_labels)
    columns: dict[str, np.ndarray] = {}
    for i in range(sources.channel_count):
        columns[f"source_{i + 1}"] = signals.standardize(sources.data[i])

    best = artifact.final_archive[report.best_index]
    n = sources.channel_count
    best_est = best.genome.reshape(n, n) @ mixtures.data
    perm = evaluation.pair_sources(sources.data, best_est)
    for i in range(n):
        columns[f"best_{i + 1}"] = evaluation.align(sources.data[i], best_est[perm[i]])

    combined_est = report.combined_w @ mixtures.data
    for i in range(n):
        columns[f"combined_{i + 1}"] = evaluation.align(sources.data[i], combined_est[i])
    return columns


def cmd_evaluate(args) -> int:
    artifact = artifacts.load_artifact(args.artifact)
    sources = signals.load_signals(args.sources)
    report = experiment.evaluate_artifact(
        artifact, sources, order_by=args.order_by, with_mono=not args.no_mono
    )

    run_id = args.artifact.name
    for suffix in (".run.json", ".json"):
        if run_id.endswith(suffix):
            run_id = run_id[: -len(suffix)]
            break
    out_dir = args.out if args.out else args.artifact.parent
    out_dir.mkdir(parents=True, exist_ok=True)

    artifacts.save_report(report, out_dir / f"{run_id}.report.json", run_id)
    artifacts.write_front_csv(report, out_dir / f"{run_id}.front.csv")
    artifacts.write_sir_curves_csv(report, out_dir / f"{run_id}.sir_ordered.csv")

    specs = artifact.resolved_criteria
    feas = artifact.config.feasibility
    points = {
        "mse": criteria.evaluate(report.mse_w, artifact.mixtures, specs, feas.threshold, feas.penalty),
        "combined": criteria.evaluate(
            report.combined_w, artifact.mixtures, specs, feas.threshold, feas.penalty
        ),
    }
    artifacts.write_benchmark_points_csv(list(points.values()), out_dir / f"{run_id}.benchmarks.csv")

    columns = _aligned_estimate_columns(artifact, report, sources)
    artifacts.write_estimates_csv(columns, out_dir / f"{run_id}.estimates.csv")

    plotting.render_front(report, out_dir / f"{run_id}.front.png", points)
    plotting.render_sir_curves(report, out_dir / f"{run_id}.sir_ordered.png")
    plotting.render_estimates(columns, out_dir / f"{run_id}.estimates.png")

    with np.printoptions(precision=2, suppress=True):
        print(f"wrote report + tables + figures under {out_dir}/{run_id}.*")
        print(f"best member {report.best_index}: sir {report.per_solution_sir[report.best_index]}")
        print(f"combined: {report.combined_sir}  mse: {report.mse_sir}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_or_default(args.config, args.seed)
    result = experiment.snr_sweep(cfg)
    args.out.mkdir(parents=True, exist_ok=True)
    name = _base_name(args)
    artifacts.save_sweep(result, args.out / f"{name}.sweep.json")
    artifacts.write_sweep_csv(result, args.out / f"{name}.sweep.csv")
    plotting.render_sweep(result, args.out / f"{name}.sweep.png")
    print(f"wrote sweep outputs under {args.out}/{name}.sweep.*")
    if result.failures:
        print(f"{len(result.failures)} cell(s) failed; see the sweep JSON for details")
    return 0


def cmd_convergence(args) -> int:
    artifact = artifacts.load_artifact(args.artifact)
    if len(artifact.snapshots) < 2:
        raise ConfigError(
            [f"artifact has {len(artifact.snapshots)} snapshot(s); need >= 2 for convergence"]
        )
    run_id = args.artifact.name
    for suffix in (".run.json", ".json"):
        if run_id.endswith(suffix):
            run_id = run_id[: -len(suffix)]
            break
    out_dir = args.out if args.out else args.artifact.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    artifacts.write_convergence_csv(artifact, out_dir / f"{run_id}.convergence.csv")
    artifacts.write_convergence_summary_csv(
        artifact, out_dir / f"{run_id}.convergence_summary.csv"
    )
    plotting.render_convergence(artifact, out_dir / f"{run_id}.convergence.png")
    final = artifact.snapshots[-1]
    print(
        f"wrote convergence outputs under {out_dir}/{run_id}.convergence*; "
        f"final penalized count {int(final.penalized.sum())}"
    )
    return 0


def cmd_serve(args) -> int:
    server.serve_forever(args.dir, args.port)
    return 0


def cmd_init_config(args) -> int:
    save_config(RunConfig(), args.out)
    print(f"wrote {args.out}")
    return 0


_COMMANDS = {
    "run": cmd_run,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "convergence": cmd_convergence,
    "serve": cmd_serve,
    "init-config": cmd_init_config,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        for message in exc.errors:
            print(f"config error: {message}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 2
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
