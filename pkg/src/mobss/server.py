"""Read-mostly HTTP service exposing run artifacts for the selection loop.

Endpoints (JSON request/response, same schema family as the artifacts):

* ``GET /runs`` -- run summaries for every artifact in the directory;
  malformed files are listed with a load-error status.
* ``GET /runs/<id>/front?order_by=<k>`` -- the archive front sorted
  ascending by one criterion (stable for equal values).
* ``GET /runs/<id>/solutions/<index>?max_points=<n>`` -- one solution with
  estimates recomputed on demand from the stored mixtures; SIR values are
  attached when an evaluation report exists for the run.
* ``POST /runs/<id>/combinations`` with body ``{"picks": [[member, row],
  ...], "max_points": n}`` -- estimates and objectives of a composite
  matrix assembled from the picked rows. Composites are session-scoped:
  nothing is written back to the artifact.

Responses are pure functions of (artifact, request); waveforms are
decimated to a requested point budget with a peak-preserving bucket rule.
"""

from __future__ import annotations

import json
import re
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

import numpy as np

from . import artifacts, criteria, evaluation
from .artifacts import RunArtifact

RUN_SUFFIX = ".run.json"
REPORT_SUFFIX = ".report.json"


def decimate(values, max_points: int | None) -> tuple[list[int], list[float]]:
    """Reduce a waveform to at most ``max_points`` samples.

    Buckets the signal and keeps the largest-|value| sample of each bucket,
    so peak positions move by less than one bucket stride.
    """
    arr = np.asarray(values, dtype=float).ravel()
    if max_points is None or arr.size <= max_points:
        return list(range(arr.size)), [float(v) for v in arr]
    if max_points < 1:
        raise ValueError(f"max_points must be >= 1, got {max_points}")
    stride = int(np.ceil(arr.size / max_points))
    indices = []
    for start in range(0, arr.size, stride):
        chunk = arr[start : start + stride]
        indices.append(start + int(np.argmax(np.abs(chunk))))
    return indices, [float(arr[i]) for i in indices]


class RunStore:
    """Artifact directory scanner with mtime-keyed caching."""

    def __init__(self, directory):
        from pathlib import Path

        self.directory = Path(directory)
        if not self.directory.is_dir():
            raise NotADirectoryError(f"{directory} is not a readable directory")
        self._cache: dict[str, tuple[float, RunArtifact]] = {}

    def run_ids(self) -> list[str]:
        return sorted(
            p.name[: -len(RUN_SUFFIX)]
            for p in self.directory.glob(f"*{RUN_SUFFIX}")
        )

    def summaries(self) -> list[dict]:
        out = []
        for run_id in self.run_ids():
            try:
                artifact = self.load(run_id)
            except Exception as exc:
                out.append({"id": run_id, "status": "load-error", "error": str(exc)})
                continue
            out.append(
                {
                    "id": run_id,
                    "status": "ok",
                    "archive_size": len(artifact.final_archive),
                    "criteria": [
                        {"id": s.id, "lag": s.lag} for s in artifact.resolved_criteria
                    ],
                    "detected_tau": artifact.detected_tau,
                    "channels": len(artifact.mixture_labels),
                    "samples": int(artifact.mixtures.shape[1]),
                    "evaluated": self._report_path(run_id).exists(),
                }
            )
        return out

    def _artifact_path(self, run_id: str):
        return self.directory / f"{run_id}{RUN_SUFFIX}"

    def _report_path(self, run_id: str):
        return self.directory / f"{run_id}{REPORT_SUFFIX}"

    def load(self, run_id: str) -> RunArtifact:
        path = self._artifact_path(run_id)
        if not path.exists():
            raise KeyError(f"unknown run {run_id!r}")
        stamp = path.stat().st_mtime
        cached = self._cache.get(run_id)
        if cached is not None and cached[0] == stamp:
            return cached[1]
        artifact = artifacts.load_artifact(path)
        self._cache[run_id] = (stamp, artifact)
        return artifact

    def load_report(self, run_id: str):
        path = self._report_path(run_id)
        if not path.exists():
            return None
        return artifacts.load_report(path)


def front_body(artifact: RunArtifact, order_by: int) -> dict:
    objectives = np.array([c.objectives.values for c in artifact.final_archive])
    if not 0 <= order_by < objectives.shape[1]:
        raise ValueError(
            f"order_by {order_by} out of range for {objectives.shape[1]} criteria"
        )
    order = np.argsort(objectives[:, order_by], kind="stable")
    return {
        "order_by": order_by,
        "indices": [int(i) for i in order],
        "objectives": [objectives[i].tolist() for i in order],
        "penalized": [bool(artifact.final_archive[i].objectives.penalized) for i in order],
        "criteria": [{"id": s.id, "lag": s.lag} for s in artifact.resolved_criteria],
    }


def _estimates_body(artifact: RunArtifact, w: np.ndarray, max_points: int | None) -> dict:
    est = w @ artifact.mixtures
    waveforms = []
    for row in est:
        t, values = decimate(row, max_points)
        waveforms.append({"t": t, "values": values})
    return {
        "labels": [f"est{i + 1}" for i in range(est.shape[0])],
        "sample_count": int(est.shape[1]),
        "waveforms": waveforms,
    }


def solution_body(
    artifact: RunArtifact, index: int, max_points: int | None, report=None
) -> dict:
    archive = artifact.final_archive
    if not 0 <= index < len(archive):
        raise IndexError(f"solution index {index} out of range [0, {len(archive) - 1}]")
    cand = archive[index]
    n = len(artifact.mixture_labels)
    body = {
        "index": index,
        "objectives": cand.objectives.values.tolist(),
        "penalized": bool(cand.objectives.penalized),
        "genome": cand.genome.tolist(),
        "estimates": _estimates_body(artifact, cand.genome.reshape(n, n), max_points),
        "sir": None,
        "sir_infinite": None,
    }
    if report is not None:
        values, mask = artifacts.encode_maybe_infinite(report.per_solution_sir[index])
        body["sir"] = values
        body["sir_infinite"] = mask
    return body


def combination_body(artifact: RunArtifact, picks, max_points: int | None) -> dict:
    w = evaluation.user_combine(artifact.final_archive, picks)
    obj = criteria.evaluate(
        w,
        artifact.mixtures,
        artifact.resolved_criteria,
        artifact.config.feasibility.threshold,
        artifact.config.feasibility.penalty,
    )
    return {
        "picks": [[int(m), int(r)] for m, r in picks],
        "objectives": obj.values.tolist(),
        "penalized": bool(obj.penalized),
        "w": w.tolist(),
        "estimates": _estimates_body(artifact, w, max_points),
    }


class ExplorerHandler(BaseHTTPRequestHandler):
    store: RunStore  # attached by make_server

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send(self, status: int, body: dict) -> None:
        payload = json.dumps(body, sort_keys=True).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(payload)

    def _error(self, status: int, message: str) -> None:
        self._send(status, {"error": message})

    def do_GET(self):
        url = urlparse(self.path)
        query = parse_qs(url.query)
        parts = [p for p in url.path.split("/") if p]
        try:
            if parts == ["runs"]:
                self._send(200, {"runs": self.store.summaries()})
            elif len(parts) == 3 and parts[0] == "runs" and parts[2] == "front":
                artifact = self.store.load(parts[1])
                order_by = int(query.get("order_by", ["0"])[0])
                self._send(200, front_body(artifact, order_by))
            elif len(parts) == 4 and parts[0] == "runs" and parts[2] == "solutions":
                artifact = self.store.load(parts[1])
                index = int(parts[3])
                max_points = query.get("max_points")
                max_points = int(max_points[0]) if max_points else None
                report = self.store.load_report(parts[1])
                self._send(200, solution_body(artifact, index, max_points, report))
            else:
                self._error(404, f"no such route {url.path}")
        except KeyError as exc:
            self._error(404, str(exc.args[0]))
        except IndexError as exc:
            self._error(404, str(exc))
        except ValueError as exc:
            self._error(400, str(exc))
        except Exception as exc:
            self._error(500, f"{type(exc).__name__}: {exc}")

    def do_POST(self):
        url = urlparse(self.path)
        parts = [p for p in url.path.split("/") if p]
        try:
            if len(parts) == 3 and parts[0] == "runs" and parts[2] == "combinations":
                length = int(self.headers.get("Content-Length", 0))
                try:
                    doc = json.loads(self.rfile.read(length) or b"{}")
                except json.JSONDecodeError as exc:
                    return self._error(400, f"invalid JSON body: {exc}")
                picks = doc.get("picks")
                if not isinstance(picks, list) or not all(
                    isinstance(p, (list, tuple)) and len(p) == 2 for p in picks
                ):
                    return self._error(400, "body must carry picks: [[member, row], ...]")
                artifact = self.store.load(parts[1])
                max_points = doc.get("max_points")
                self._send(200, combination_body(artifact, picks, max_points))
            else:
                self._error(404, f"no such route {url.path}")
        except KeyError as exc:
            self._error(404, str(exc.args[0]))
        except ValueError as exc:
            self._error(400, str(exc))
        except Exception as exc:
            self._error(500, f"{type(exc).__name__}: {exc}")


def make_server(directory, port: int) -> ThreadingHTTPServer:
    """Bind the explorer service to a port (0 picks a free one)."""
    store = RunStore(directory)
    handler = type("BoundExplorerHandler", (ExplorerHandler,), {"store": store})
    return ThreadingHTTPServer(("127.0.0.1", port), handler)


def serve_forever(directory, port: int) -> None:
    httpd = make_server(directory, port)
    host, bound_port = httpd.server_address
    print(f"explorer service on http://{host}:{bound_port} (artifacts: {directory})")
    try:
        httpd.serve_forever()
    finally:
        httpd.server_close()
