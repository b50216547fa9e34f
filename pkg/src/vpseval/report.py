"""Report documents: one JSON-shaped struct drives both machine and table output.

Raw doubles live in the JSON; percentages rounded to one decimal appear only
in the rendered table. The schema is versioned and stable; reports never echo
runtime-only knobs (thread count), so identical inputs give identical bytes.
"""

from __future__ import annotations

import json
from typing import Mapping

from .core import ClassTaxonomy
from .errors import DatasetValidationError, VpsError
from .vpq import VpqConfig, VpqResult

SCHEMA_VERSION = 1
TOOL_NAME = "vpseval"


def _envelope(version: str) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "tool": TOOL_NAME,
        "version": version,
    }


def build_evaluate_report(
    result: VpqResult,
    summary: Mapping,
    config: VpqConfig,
    taxonomy: ClassTaxonomy,
    gt_label: str,
    pred_label: str,
    version: str,
) -> dict:
    per_k = {}
    for k in config.window_spans:
        kr = result.per_k[k]
        per_k[str(k)] = {
            "vpq": kr.vpq,
            "vpq_things": kr.vpq_things,
            "vpq_stuff": kr.vpq_stuff,
            "classes": {
                str(c): {
                    "name": taxonomy.by_id[c].name,
                    "kind": taxonomy.by_id[c].kind,
                    "pq": s.pq,
                    "sq": s.sq,
                    "rq": s.rq,
                    "iou_sum": s.iou_sum,
                    "tp": s.tp,
                    "fp": s.fp,
                    "fn": s.fn,
                }
                for c, s in sorted(kr.per_class.items())
            },
        }
    doc = _envelope(version)
    doc.update(
        {
            "status": "ok",
            "command": "evaluate",
            "config": {
                "gt": gt_label,
                "pred": pred_label,
                "windows": list(config.window_spans),
                "annotation_stride": config.annotation_stride,
                "iou_threshold": config.iou_threshold,
            },
            "validation": dict(summary),
            "per_k": per_k,
            "final": {
                "vpq": result.vpq,
                "vpq_things": result.vpq_things,
                "vpq_stuff": result.vpq_stuff,
            },
        }
    )
    return doc


def build_command_report(command: str, payload: Mapping, version: str) -> dict:
    doc = _envelope(version)
    doc.update({"status": "ok", "command": command})
    doc.update(payload)
    return doc


def build_error_report(err: Exception, version: str) -> dict:
    doc = _envelope(version)
    name = err.error_name if isinstance(err, VpsError) else type(err).__name__
    error: dict = {"name": name, "message": str(err)}
    if isinstance(err, DatasetValidationError):
        error["issues"] = [issue.as_dict() for issue in err.issues]
    doc.update({"status": "error", "error": error})
    return doc


def canonical_json(doc: Mapping) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _pct(value) -> str:
    if value is None:
        return "-"
    return f"{100.0 * value:.1f}"


def render_table(report: Mapping) -> str:
    """Human-readable VPQ table mirroring the JSON report."""
    lines = []
    cfg = report["config"]
    lines.append(f"dataset: gt={cfg['gt']} pred={cfg['pred']}")
    val = report["validation"]
    lines.append(
        f"videos: {val['videos']}   frames evaluated: {val['frames_evaluated']}"
    )
    lines.append("")
    lines.append(f"{'k':>6} {'VPQ':>8} {'VPQ-Th':>8} {'VPQ-St':>8}")
    for k in cfg["windows"]:
        kr = report["per_k"][str(k)]
        lines.append(
            f"{k:>6} {_pct(kr['vpq']):>8} {_pct(kr['vpq_things']):>8} "
            f"{_pct(kr['vpq_stuff']):>8}"
        )
    final = report["final"]
    lines.append(
        f"{'all':>6} {_pct(final['vpq']):>8} {_pct(final['vpq_things']):>8} "
        f"{_pct(final['vpq_stuff']):>8}"
    )
    return "\n".join(lines) + "\n"


def render_issues(err: DatasetValidationError) -> str:
    lines = [f"dataset validation failed with {len(err.issues)} issue(s):"]
    for issue in err.issues:
        lines.append(f"  [{issue.code}] {issue.message}")
    return "\n".join(lines) + "\n"


def per_class_table(report: Mapping, k: int | str) -> str:
    """Per-class breakdown for one window span (diagnostic)."""
    kr = report["per_k"][str(k)]
    lines = [f"per-class at k={k}"]
    lines.append(
        f"{'class':>8} {'name':>12} {'PQ':>8} {'SQ':>8} {'RQ':>8} "
        f"{'TP':>5} {'FP':>5} {'FN':>5}"
    )
    for cid, s in sorted(kr["classes"].items(), key=lambda kv: int(kv[0])):
        lines.append(
            f"{cid:>8} {s['name']:>12} {_pct(s['pq']):>8} {_pct(s['sq']):>8} "
            f"{_pct(s['rq']):>8} {s['tp']:>5} {s['fp']:>5} {s['fn']:>5}"
        )
    return "\n".join(lines) + "\n"
