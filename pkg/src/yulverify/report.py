"""Result reporting: a JSON document with a published schema, plus a
tab-delimited text rendering for terminals and scripts."""

from __future__ import annotations

import json
from typing import Optional

import jsonschema

from .pipeline import PipelineConfig, VerifyOutcome

TOOL = "yulverify"
VERSION = "0.1.0"

STATUSES = ("Verified", "Refuted", "Unknown", "Timeout", "SolverError", "Deferred")
PTYPES = ("T1", "T2", "T3", "T4", "T5", "T6")

REPORT_SCHEMA: dict = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": [
        "tool",
        "version",
        "source",
        "config",
        "elapsed",
        "obligations",
        "findings",
        "inference",
        "errors",
        "totals",
        "ok",
    ],
    "additionalProperties": False,
    "properties": {
        "tool": {"const": TOOL},
        "version": {"type": "string"},
        "source": {"type": "string"},
        "config": {
            "type": "object",
            "required": ["solver", "timeout", "jobs", "wrap_bits", "degree"],
            "additionalProperties": True,
            "properties": {
                "solver": {"type": "string"},
                "timeout": {"type": "number"},
                "jobs": {"type": "integer"},
                "wrap_bits": {"type": ["integer", "null"]},
                "degree": {"type": "integer"},
                "ecf": {"type": "object"},
            },
        },
        "elapsed": {"type": "number"},
        "obligations": {
            "type": "array",
            "items": {
                "type": "object",
                "required": [
                    "oid",
                    "fn",
                    "kind",
                    "ptype",
                    "line",
                    "col",
                    "text",
                    "deferred",
                    "status",
                    "time",
                ],
                "additionalProperties": False,
                "properties": {
                    "oid": {"type": "string"},
                    "fn": {"type": "string"},
                    "kind": {"type": "string"},
                    "ptype": {"enum": list(PTYPES)},
                    "line": {"type": "integer"},
                    "col": {"type": "integer"},
                    "text": {"type": "string"},
                    "deferred": {"type": "boolean"},
                    "status": {"enum": list(STATUSES)},
                    "backend": {"type": "string"},
                    "time": {"type": "number"},
                    "model": {"type": ["object", "null"]},
                    "model_valid": {"type": ["boolean", "null"]},
                    "detail": {"type": "string"},
                },
            },
        },
        "findings": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["pattern", "fn", "line", "col", "message"],
                "additionalProperties": False,
                "properties": {
                    "pattern": {"type": "string"},
                    "fn": {"type": "string"},
                    "line": {"type": "integer"},
                    "col": {"type": "integer"},
                    "message": {"type": "string"},
                    "chain": {"type": "array", "items": {"type": "string"}},
                    "related_line": {"type": ["integer", "null"]},
                },
            },
        },
        "inference": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["fn", "loop", "watched", "rows", "candidates"],
                "additionalProperties": False,
                "properties": {
                    "fn": {"type": "string"},
                    "loop": {"type": "string"},
                    "watched": {"type": "array", "items": {"type": "string"}},
                    "rows": {"type": "integer"},
                    "candidates": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["invariant", "accepted", "verdicts"],
                            "additionalProperties": False,
                            "properties": {
                                "invariant": {"type": "string"},
                                "accepted": {"type": "boolean"},
                                "verdicts": {
                                    "type": "array",
                                    "items": {
                                        "type": "object",
                                        "required": ["oid", "status", "time"],
                                        "additionalProperties": False,
                                        "properties": {
                                            "oid": {"type": "string"},
                                            "status": {"type": "string"},
                                            "time": {"type": "number"},
                                        },
                                    },
                                },
                            },
                        },
                    },
                },
            },
        },
        "errors": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["context", "message"],
                "additionalProperties": False,
                "properties": {
                    "context": {"type": "string"},
                    "message": {"type": "string"},
                },
            },
        },
        "totals": {
            "type": "object",
            "required": ["obligations", "deferred", "solved", "by_status", "by_ptype"],
            "additionalProperties": False,
            "properties": {
                "obligations": {"type": "integer"},
                "deferred": {"type": "integer"},
                "solved": {"type": "integer"},
                "by_status": {
                    "type": "object",
                    "additionalProperties": {"type": "integer"},
                },
                "by_ptype": {
                    "type": "object",
                    "additionalProperties": {"type": "integer"},
                },
            },
        },
        "ok": {"type": "boolean"},
    },
}


def _jsonable(value) -> object:
    """Model values may be solver-side structures; keep ints, stringify rest."""
    if isinstance(value, (int, bool)) or value is None:
        return value
    return str(value)


def build_report(
    outcome: VerifyOutcome,
    *,
    source: str = "<unit>",
    config: Optional[PipelineConfig] = None,
) -> dict:
    """Flatten a verification outcome into the published JSON shape."""
    config = config or PipelineConfig()
    rows = []
    by_status: dict[str, int] = {}
    by_ptype: dict[str, int] = {}
    for ob in outcome.obligations:
        if ob.deferred:
            status, backend, wall = "Deferred", "", 0.0
            model = None
            model_valid = None
            detail = ""
        else:
            v = outcome.verdicts.get(ob.oid)
            if v is None:
                status, backend, wall = "SolverError", "", 0.0
                model, model_valid, detail = None, None, "no verdict recorded"
            else:
                status, backend, wall = v.status, v.backend, v.wall_time
                model = (
                    {k: _jsonable(val) for k, val in sorted(v.model.items())}
                    if v.model
                    else None
                )
                model_valid = v.model_valid
                detail = v.detail
        by_status[status] = by_status.get(status, 0) + 1
        by_ptype[ob.ptype] = by_ptype.get(ob.ptype, 0) + 1
        rows.append(
            {
                "oid": ob.oid,
                "fn": ob.fn,
                "kind": ob.kind,
                "ptype": ob.ptype,
                "line": ob.span.line,
                "col": ob.span.col,
                "text": ob.text,
                "deferred": ob.deferred,
                "status": status,
                "backend": backend,
                "time": round(wall, 4),
                "model": model,
                "model_valid": model_valid,
                "detail": detail,
            }
        )
    findings = [
        {
            "pattern": f.pattern,
            "fn": f.fn,
            "line": f.span.line,
            "col": f.span.col,
            "message": f.message,
            "chain": list(f.chain),
            "related_line": f.related.line if f.related is not None else None,
        }
        for f in outcome.findings
    ]
    inference = [
        {
            "fn": li.fn,
            "loop": li.loop_id,
            "watched": list(li.watched),
            "rows": li.rows,
            "candidates": [
                {
                    "invariant": str(c.invariant),
                    "accepted": c.accepted,
                    "verdicts": [
                        {
                            "oid": v.oid,
                            "status": v.status,
                            "time": round(v.wall_time, 4),
                        }
                        for v in c.verdicts
                    ],
                }
                for c in li.candidates
            ],
        }
        for li in outcome.inference
    ]
    doc = {
        "tool": TOOL,
        "version": VERSION,
        "source": source,
        "config": {
            "solver": config.solver,
            "timeout": config.timeout,
            "jobs": config.jobs,
            "wrap_bits": config.wrap_bits,
            "degree": config.degree,
            "ecf": dict(config.ecf),
        },
        "elapsed": round(outcome.elapsed, 4),
        "obligations": rows,
        "findings": findings,
        "inference": inference,
        "errors": [{"context": c, "message": m} for c, m in outcome.errors],
        "totals": {
            "obligations": len(rows),
            "deferred": sum(1 for r in rows if r["deferred"]),
            "solved": sum(1 for r in rows if not r["deferred"]),
            "by_status": dict(sorted(by_status.items())),
            "by_ptype": dict(sorted(by_ptype.items())),
        },
        "ok": outcome.ok,
    }
    validate_report(doc)
    return doc


def validate_report(doc: dict) -> None:
    """Raise ``jsonschema.ValidationError`` when the document is malformed."""
    jsonschema.validate(doc, REPORT_SCHEMA)


def write_report(doc: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=False)
        fh.write("\n")


def exit_code(doc: dict) -> int:
    """0 when everything verified clean, 1 otherwise."""
    return 0 if doc["ok"] else 1


# ---------------------------------------------------------------------------
# Delimited text rendering
# ---------------------------------------------------------------------------


def _model_brief(model: Optional[dict]) -> str:
    if not model:
        return ""
    parts = [f"{k}={v}" for k, v in list(model.items())[:4]]
    if len(model) > 4:
        parts.append("...")
    return " ".join(parts)


def render_delimited(doc: dict) -> str:
    """Tab-separated obligation table, findings, and a summary block."""
    out = []
    out.append("\t".join(["oid", "kind", "ptype", "line", "status", "time", "model"]))
    for r in doc["obligations"]:
        out.append(
            "\t".join(
                [
                    r["oid"],
                    r["kind"],
                    r["ptype"],
                    str(r["line"]),
                    r["status"],
                    f"{r['time']:.2f}",
                    _model_brief(r.get("model")),
                ]
            )
        )
    if doc["findings"]:
        out.append("")
        out.append("\t".join(["pattern", "fn", "line", "message"]))
        for f in doc["findings"]:
            out.append(
                "\t".join([f["pattern"], f["fn"], str(f["line"]), f["message"]])
            )
    for li in doc["inference"]:
        out.append("")
        accepted = [c["invariant"] for c in li["candidates"] if c["accepted"]]
        out.append(
            f"# inferred {li['loop']} over {','.join(li['watched'])} "
            f"({li['rows']} rows): "
            + ("; ".join(accepted) if accepted else "no invariant accepted")
        )
    for err in doc["errors"]:
        out.append("")
        out.append(f"# error {err['context']}: {err['message']}")
    totals = doc["totals"]
    status_bits = " ".join(f"{k}={v}" for k, v in totals["by_status"].items())
    ptype_bits = " ".join(f"{k}={v}" for k, v in totals["by_ptype"].items())
    out.append("")
    out.append(
        f"# {totals['obligations']} obligations "
        f"({totals['deferred']} deferred) in {doc['elapsed']:.2f}s: {status_bits}"
    )
    out.append(f"# property types: {ptype_bits}")
    out.append(f"# result: {'ok' if doc['ok'] else 'FAIL'}")
    return "\n".join(out) + "\n"
