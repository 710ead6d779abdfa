"""Command-line interface.

Subcommands:

* ``verify``          -- full pipeline: infer, check, translate, solve.
* ``trace``           -- run a function concretely and dump loop traces.
* ``infer``           -- fit and validate loop invariants only.
* ``check``           -- syntactic vulnerability checks only.
* ``export-deferred`` -- write deferred obligations as theorem files.

``--json PATH`` writes the machine-readable report; figures are rendered
next to it unless ``--no-plots`` is given.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import MissingEcfAnswer, YulVerifyError
from .interp import run_function
from .pipeline import (
    PipelineConfig,
    collect_traces,
    export_unit,
    infer_unit,
    verify_unit,
    _learn_loops,
)
from .report import build_report, exit_code, render_delimited, write_report
from .smt import available_backends
from .static_checks import run_static_checks
from .yul import parse_unit


def _parse_ecf(pairs: list[str]) -> dict[str, str]:
    out: dict[str, str] = {}
    for pair in pairs:
        name, sep, answer = pair.partition("=")
        if not sep or answer not in ("pure", "impure") or not name:
            raise SystemExit(
                f"error: --ecf expects NAME=pure or NAME=impure, got {pair!r}"
            )
        out[name] = answer
    return out


def _parse_stubs(pairs: list[str]) -> dict[str, int]:
    out: dict[str, int] = {}
    for pair in pairs:
        name, sep, value = pair.partition("=")
        if not sep or not name:
            raise SystemExit(f"error: --stub expects NAME=INT, got {pair!r}")
        try:
            out[name] = int(value, 0)
        except ValueError:
            raise SystemExit(f"error: --stub value must be an integer: {pair!r}")
    return out


def _parse_args_vector(text: str) -> list[int]:
    text = text.strip()
    if not text:
        return []
    try:
        return [int(part.strip(), 0) for part in text.split(",")]
    except ValueError:
        raise SystemExit(f"error: --args expects comma-separated integers: {text!r}")


def _config(args: argparse.Namespace) -> PipelineConfig:
    cfg = PipelineConfig(
        solver=args.solver,
        timeout=args.timeout,
        jobs=args.jobs,
        wrap_bits=args.wrap_bits,
        degree=args.degree,
        ecf=_parse_ecf(args.ecf),
        infer=not args.no_infer,
    )
    if args.runs:
        values: list[int] = []
        for chunk in args.runs:
            values.extend(_parse_args_vector(chunk))
        cfg.run_values = tuple(values)
    return cfg


def _read_source(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text(encoding="utf-8")


def _maybe_figures(args, doc: dict) -> None:
    if args.json is None or args.no_plots:
        return
    from .figures import plot_verdicts

    out = Path(args.json)
    fig = out.with_suffix(out.suffix + ".verdicts.png") if out.suffix != ".json" \
        else out.with_name(out.stem + ".verdicts.png")
    plot_verdicts(doc, fig)
    print(f"# wrote {fig}")


# ---------------------------------------------------------------------------
# Subcommand bodies
# ---------------------------------------------------------------------------


def cmd_verify(args: argparse.Namespace) -> int:
    cfg = _config(args)
    outcome = verify_unit(_read_source(args.file), cfg, source_name=args.file)
    doc = build_report(outcome, source=args.file, config=cfg)
    sys.stdout.write(render_delimited(doc))
    if args.json:
        write_report(doc, args.json)
        print(f"# wrote {args.json}")
        _maybe_figures(args, doc)
    return exit_code(doc)


def cmd_trace(args: argparse.Namespace) -> int:
    unit = parse_unit(_read_source(args.file), args.file)
    stubs = _parse_stubs(args.stub)
    runs = [_parse_args_vector(a) for a in args.args] or [[]]
    grouped: dict[str, list] = {}
    payload = []
    print("\t".join(["args", "status", "result", "steps"]))
    for vec in runs:
        outcome = run_function(
            unit, args.fn, vec, wrap_bits=args.wrap_bits, externals=dict(stubs)
        )
        print(
            "\t".join(
                [
                    ",".join(map(str, vec)),
                    outcome.status,
                    "" if outcome.result is None else str(outcome.result),
                    str(outcome.steps),
                ]
            )
        )
        for tr in outcome.traces:
            grouped.setdefault(tr.loop_id, []).append(tr)
        payload.append(
            {
                "args": vec,
                "status": outcome.status,
                "result": outcome.result,
                "steps": outcome.steps,
                "traces": [
                    {
                        "loop": tr.loop_id,
                        "watched": list(tr.watched),
                        "rows": [[i, list(vals)] for i, vals in tr.rows],
                    }
                    for tr in outcome.traces
                ],
            }
        )
    for lid, traces in sorted(grouped.items()):
        print(f"\n# loop {lid}")
        watched = traces[0].watched
        print("\t".join(["iter"] + list(watched)))
        for tr in traces:
            for i, vals in tr.rows:
                print("\t".join([str(i)] + [str(v) for v in vals]))
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump({"fn": args.fn, "runs": payload}, fh, indent=2)
            fh.write("\n")
        print(f"# wrote {args.json}")
        if grouped and not args.no_plots:
            from .figures import plot_traces

            out = Path(args.json)
            fig = out.with_name(out.stem + ".traces.png")
            plot_traces(grouped, fig)
            print(f"# wrote {fig}")
    return 0


def cmd_infer(args: argparse.Namespace) -> int:
    cfg = _config(args)
    unit = parse_unit(_read_source(args.file), args.file)
    records = infer_unit(unit, cfg)
    if args.fn:
        records = [r for r in records if r.fn == args.fn]
    print("\t".join(["loop", "watched", "rows", "invariant", "accepted"]))
    payload = []
    for rec in records:
        if not rec.candidates:
            print("\t".join([rec.loop_id, ",".join(rec.watched), str(rec.rows), "-", "-"]))
        for cand in rec.candidates:
            print(
                "\t".join(
                    [
                        rec.loop_id,
                        ",".join(rec.watched),
                        str(rec.rows),
                        str(cand.invariant),
                        "yes" if cand.accepted else "no",
                    ]
                )
            )
        payload.append(
            {
                "fn": rec.fn,
                "loop": rec.loop_id,
                "watched": list(rec.watched),
                "rows": rec.rows,
                "candidates": [
                    {
                        "invariant": str(c.invariant),
                        "accepted": c.accepted,
                        "verdicts": [
                            {"oid": v.oid, "status": v.status, "time": round(v.wall_time, 4)}
                            for v in c.verdicts
                        ],
                    }
                    for c in rec.candidates
                ],
            }
        )
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump({"inference": payload}, fh, indent=2)
            fh.write("\n")
        print(f"# wrote {args.json}")
        if not args.no_plots:
            grouped: dict[str, list] = {}
            for fn in unit.functions:
                if _learn_loops(fn):
                    for lid, trs in collect_traces(unit, fn, cfg).items():
                        grouped.setdefault(lid, []).extend(trs)
            if grouped:
                from .figures import plot_traces

                out = Path(args.json)
                fig = out.with_name(out.stem + ".traces.png")
                plot_traces(grouped, fig)
                print(f"# wrote {fig}")
    return 0 if all(c.accepted for r in records for c in r.candidates) else 1


def cmd_check(args: argparse.Namespace) -> int:
    unit = parse_unit(_read_source(args.file), args.file)
    findings = run_static_checks(unit)
    print("\t".join(["pattern", "fn", "line", "message"]))
    for f in findings:
        print("\t".join([f.pattern, f.fn, str(f.span.line), f.message]))
    print(f"# {len(findings)} finding(s)")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "findings": [
                        {
                            "pattern": f.pattern,
                            "fn": f.fn,
                            "line": f.span.line,
                            "col": f.span.col,
                            "message": f.message,
                            "chain": list(f.chain),
                        }
                        for f in findings
                    ]
                },
                fh,
                indent=2,
            )
            fh.write("\n")
        print(f"# wrote {args.json}")
    return 1 if findings else 0


def cmd_export(args: argparse.Namespace) -> int:
    cfg = _config(args)
    manifest = export_unit(
        _read_source(args.file), args.out, cfg, source_name=args.file
    )
    print("\t".join(["theorem", "file", "kind"]))
    for thm in manifest["theorems"]:
        print("\t".join([thm["id"], thm["file"], thm["kind"]]))
    print(
        f"# wrote {len(manifest['theorems'])} theorem(s) and "
        f"{len(manifest['axioms'])} binding axiom(s) to {args.out}"
    )
    for err in manifest.get("errors", []):
        print(f"# error {err}", file=sys.stderr)
    return 0 if not manifest.get("errors") else 2


def cmd_backends(args: argparse.Namespace) -> int:
    for name in available_backends():
        print(name)
    return 0


# ---------------------------------------------------------------------------
# Parser assembly
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="yulverify",
        description="Deductive verifier for annotated restricted-Yul units.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("file", help="annotated source file ('-' for stdin)")
    common.add_argument("--solver", default="z3", help="solver backend name")
    common.add_argument("--timeout", type=float, default=10.0,
                        help="per-obligation solver timeout in seconds")
    common.add_argument("--jobs", type=int, default=1,
                        help="obligations solved in parallel")
    common.add_argument("--wrap-bits", type=int, default=None, metavar="N",
                        help="check arithmetic against an N-bit word")
    common.add_argument("--degree", type=int, default=3,
                        help="max degree for fitted loop invariants")
    common.add_argument("--ecf", action="append", default=[], metavar="NAME=ANSWER",
                        help="effective-callback-freeness answer for an external "
                             "function: pure or impure (repeatable)")
    common.add_argument("--runs", action="append", default=[], metavar="V1,V2,...",
                        help="override the argument ladder for invariant fitting")
    common.add_argument("--no-infer", action="store_true",
                        help="skip invariant inference")
    common.add_argument("--json", default=None, metavar="PATH",
                        help="write the JSON report here")
    common.add_argument("--no-plots", action="store_true",
                        help="do not render figures beside the JSON report")

    p = sub.add_parser("verify", parents=[common],
                       help="solve every obligation in the unit")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("trace", parents=[common],
                       help="run a function concretely and dump loop traces")
    p.add_argument("--fn", required=True, help="function to run")
    p.add_argument("--args", action="append", default=[], metavar="V1,V2,...",
                   help="argument vector for one run (repeatable)")
    p.add_argument("--stub", action="append", default=[], metavar="NAME=INT",
                   help="constant return value for an external function")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("infer", parents=[common],
                       help="fit and validate loop invariants")
    p.add_argument("--fn", default=None, help="restrict to one function")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("check", parents=[common],
                       help="run the syntactic vulnerability checks")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("export-deferred", parents=[common],
                       help="write deferred obligations as theorem files")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("backends", help="list available solver backends")
    p.set_defaults(func=cmd_backends)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MissingEcfAnswer as e:
        print(f"error: {e}", file=sys.stderr)
        print("hint: answer with --ecf NAME=pure or --ecf NAME=impure",
              file=sys.stderr)
        return 2
    except YulVerifyError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
