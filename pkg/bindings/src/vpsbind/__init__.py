"""Thin scripting bindings over the ``vpseval`` command line.

Each call runs one full pipeline through the engine's CLI and returns the
parsed JSON report as plain dicts and lists, so the numbers are identical to
what the CLI prints for the same arguments. No state is held between calls.

Engine failures surface as :class:`EngineError`, carrying the engine's typed
error name (``error_name``), its message, and any validation issues.
"""

from __future__ import annotations

import json
import subprocess
import sys
from typing import Sequence

__version__ = "0.1.0"

__all__ = [
    "EngineError",
    "engine_version",
    "evaluate",
    "convert",
    "fuse",
    "track",
    "__version__",
]


class EngineError(RuntimeError):
    """An engine-side failure, identified by the engine's typed error name."""

    def __init__(self, error_name: str, message: str, issues: list | None = None):
        super().__init__(f"[{error_name}] {message}")
        self.error_name = error_name
        self.message = message
        self.issues = issues or []


def _run(args: Sequence[str]) -> dict:
    proc = subprocess.run(
        [sys.executable, "-m", "vpseval", *args],
        capture_output=True,
        text=True,
    )
    if proc.returncode == 0:
        return json.loads(proc.stdout)
    try:
        doc = json.loads(proc.stdout)
        error = doc.get("error", {})
        raise EngineError(
            error.get("name", "UnknownError"),
            error.get("message", proc.stdout.strip()),
            error.get("issues"),
        )
    except json.JSONDecodeError:
        pass
    name = "UsageError" if proc.returncode == 2 else "InternalError"
    raise EngineError(name, (proc.stderr or proc.stdout).strip())


def engine_version() -> str:
    proc = subprocess.run(
        [sys.executable, "-m", "vpseval", "--version"],
        capture_output=True,
        text=True,
        check=True,
    )
    return proc.stdout.strip().split()[-1]


def evaluate(
    gt_manifest,
    pred_manifest,
    *,
    lambda_: int | None = None,
    windows: Sequence[int] = (0, 5, 10, 15),
    threads: int | None = None,
) -> dict:
    """Evaluate a prediction manifest against ground truth; returns the report."""
    args = [
        "evaluate",
        "--gt", str(gt_manifest),
        "--pred", str(pred_manifest),
        "--windows", ",".join(str(k) for k in windows),
        "--format", "json",
    ]
    if lambda_ is not None:
        args += ["--lambda", str(lambda_)]
    if threads is not None:
        args += ["--threads", str(threads)]
    return _run(args)


def convert(src_manifest, encoding: str, out_dir) -> dict:
    """Re-encode a dataset; returns the conversion summary."""
    return _run([
        "convert", "--src", str(src_manifest),
        "--encoding", encoding, "--out", str(out_dir),
    ])


def fuse(
    instances,
    semantic_dir,
    taxonomy,
    out_dir,
    *,
    lambda_: int = 1,
    encoding: str = "coco-rgb",
) -> dict:
    """Fuse instance predictions with semantic maps into a panoptic dataset."""
    return _run([
        "fuse", "--instances", str(instances),
        "--semantic-dir", str(semantic_dir),
        "--taxonomy", str(taxonomy),
        "--out", str(out_dir),
        "--lambda", str(lambda_),
        "--encoding", encoding,
    ])


def track(
    instances,
    semantic_dir,
    taxonomy,
    out_dir,
    *,
    method: str,
    flow_dir=None,
    affinity_dir=None,
    weights: Sequence[float] | None = None,
    retire_gap: int | None = None,
    assignment: str | None = None,
    lambda_: int = 1,
    encoding: str = "coco-rgb",
) -> dict:
    """Run id association plus fusion; returns the tracking summary."""
    args = [
        "track", "--instances", str(instances),
        "--semantic-dir", str(semantic_dir),
        "--taxonomy", str(taxonomy),
        "--out", str(out_dir),
        "--method", method,
        "--lambda", str(lambda_),
        "--encoding", encoding,
    ]
    if flow_dir is not None:
        args += ["--flow-dir", str(flow_dir)]
    if affinity_dir is not None:
        args += ["--affinity-dir", str(affinity_dir)]
    if weights is not None:
        args += ["--weights", ",".join(str(w) for w in weights)]
    if retire_gap is not None:
        args += ["--retire-gap", str(retire_gap)]
    if assignment is not None:
        args += ["--assignment", assignment]
    return _run(args)
