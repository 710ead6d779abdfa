"""End-to-end verification flow for one annotated unit.

Order of operations for ``verify_unit``:

1. fit and validate loop invariants for every ``@learn`` loop, installing
   the accepted ones as ``@inv`` items;
2. run the syntactic vulnerability checks requested by ``@check``;
3. translate the unit and generate proof obligations per function;
4. discharge every non-deferred obligation through the configured solver.

Deferred obligations are collected but never sent to a solver; they are
written out as theorem files by ``export_unit``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Union

from .annotations import Directive, SpecItem, print_form
from .errors import MissingInvariant, YulVerifyError
from .interp import run_function
from .invariants import PolyInvariant, fit_invariants, merge_traces
from .smt import SolverConfig, Verdict, discharge_all, export_deferred
from .static_checks import Finding, run_static_checks
from .translate import TranslateConfig, UnitInfo, translate_unit
from .vir import VirFunction
from .wp import Obligation, function_obligations
from .yul import Block, For, If, Switch, YulFunc, YulUnit, parse_unit

# Argument ladder used to drive concrete runs for invariant fitting.  Each
# value is broadcast across all parameters of the traced function; runs whose
# preconditions fail concretely are dropped, so the surviving rows all come
# from admissible executions.
DEFAULT_RUN_VALUES: tuple[int, ...] = (13, 20, 37, 5, 8, 11, 2, 1, 0, 50)


@dataclass
class PipelineConfig:
    """Knobs shared by the CLI subcommands."""

    solver: str = "z3"
    timeout: float = 10.0
    jobs: int = 1
    wrap_bits: Optional[int] = None
    degree: int = 3
    ecf: dict[str, str] = field(default_factory=dict)
    run_values: tuple[int, ...] = DEFAULT_RUN_VALUES
    infer: bool = True
    max_candidates: int = 8

    def translate_config(self) -> TranslateConfig:
        return TranslateConfig(wrap_bits=self.wrap_bits, ecf=dict(self.ecf))

    def solver_config(self) -> SolverConfig:
        return SolverConfig(name=self.solver, timeout=self.timeout, jobs=self.jobs)


@dataclass
class CandidateResult:
    """Validation outcome for one fitted invariant candidate."""

    invariant: PolyInvariant
    verdicts: list[Verdict]
    accepted: bool


@dataclass
class LoopInference:
    """Everything learned about one ``@learn`` loop."""

    fn: str
    loop_id: str
    watched: tuple[str, ...]
    rows: int
    candidates: list[CandidateResult]

    @property
    def accepted(self) -> list[PolyInvariant]:
        return [c.invariant for c in self.candidates if c.accepted]


@dataclass
class VerifyOutcome:
    """Result bundle for a whole-unit verification run."""

    unit: YulUnit
    info: Optional[UnitInfo]
    obligations: list[Obligation]
    verdicts: dict[str, Verdict]
    findings: list[Finding]
    inference: list[LoopInference]
    errors: list[tuple[str, str]]
    elapsed: float

    @property
    def deferred(self) -> list[Obligation]:
        return [ob for ob in self.obligations if ob.deferred]

    @property
    def active(self) -> list[Obligation]:
        return [ob for ob in self.obligations if not ob.deferred]

    @property
    def ok(self) -> bool:
        """True when nothing failed: no errors, no findings, and every
        non-deferred obligation came back Verified."""
        if self.errors or self.findings:
            return False
        return all(
            self.verdicts[ob.oid].status == "Verified"
            for ob in self.active
            if ob.oid in self.verdicts
        ) and all(ob.oid in self.verdicts for ob in self.active)


# ---------------------------------------------------------------------------
# @learn discovery and trace collection
# ---------------------------------------------------------------------------


def _learn_loops(fn: YulFunc) -> list[For]:
    """All for-loops under ``fn`` carrying an ``@learn`` directive."""
    found: list[For] = []

    def block(b: Block) -> None:
        for s in b.stmts:
            stmt(s)

    def stmt(s) -> None:
        if isinstance(s, For):
            if any(i.directive is Directive.LEARN for i in s.specs):
                found.append(s)
            block(s.init)
            block(s.body)
            block(s.post)
        elif isinstance(s, If):
            block(s.body)
        elif isinstance(s, Switch):
            for _, b in s.cases:
                block(b)
            if s.default is not None:
                block(s.default)

    block(fn.body)
    return found


def loop_id(fn: YulFunc, loop: For) -> str:
    """Identifier matching the interpreter's trace grouping key."""
    return f"{fn.name}:{loop.span.line}:{loop.span.col}"


def collect_traces(unit: YulUnit, fn: YulFunc, config: PipelineConfig):
    """Drive the function over the argument ladder and group loop traces.

    Runs that raise, revert, or fail an assumption contribute nothing.
    """
    grouped: dict[str, list] = {}
    n = len(fn.params)
    for v in config.run_values:
        try:
            outcome = run_function(
                unit, fn.name, [v] * n, wrap_bits=config.wrap_bits
            )
        except YulVerifyError:
            continue
        if outcome.status != "returned":
            continue
        for tr in outcome.traces:
            grouped.setdefault(tr.loop_id, []).append(tr)
    return grouped


# ---------------------------------------------------------------------------
# Candidate validation and installation
# ---------------------------------------------------------------------------


def _matching_loop(fn: YulFunc, invariant: PolyInvariant) -> For:
    for loop in _learn_loops(fn):
        learn = next(i for i in loop.specs if i.directive is Directive.LEARN)
        if learn.names == invariant.variables:
            return loop
    raise MissingInvariant(
        f"{fn.name} has no @learn loop watching {invariant.variables}"
    )


def validate_fitted_invariant(
    unit: YulUnit,
    fn_name: str,
    invariant: PolyInvariant,
    config: Optional[PipelineConfig] = None,
) -> CandidateResult:
    """Temporarily install a candidate and solve its loop obligations.

    The candidate is accepted only if every initiation and consecution
    obligation it generates comes back Verified.  The unit is left exactly
    as found.
    """
    config = config or PipelineConfig()
    fn = unit.function(fn_name)
    loop = _matching_loop(fn, invariant)
    item = SpecItem(Directive.INV, span=loop.span, form=invariant.as_form())
    text = print_form(item.form)
    loop.specs.append(item)
    try:
        vfuncs, _ = translate_unit(unit, config.translate_config())
        obligations = function_obligations(vfuncs[fn_name])
    finally:
        loop.specs.remove(item)
    mine = [
        ob
        for ob in obligations
        if ob.kind in ("Inv-Init", "Inv-Preserve") and ob.text == text
    ]
    verdicts = discharge_all(mine, config.solver_config())
    accepted = bool(mine) and all(v.status == "Verified" for v in verdicts)
    return CandidateResult(invariant, verdicts, accepted)


def infer_unit(unit: YulUnit, config: Optional[PipelineConfig] = None) -> list[LoopInference]:
    """Fit, validate, and install invariants for every ``@learn`` loop."""
    config = config or PipelineConfig()
    out: list[LoopInference] = []
    for fn in unit.functions:
        loops = _learn_loops(fn)
        if not loops:
            continue
        grouped = collect_traces(unit, fn, config)
        for loop in loops:
            lid = loop_id(fn, loop)
            learn = next(i for i in loop.specs if i.directive is Directive.LEARN)
            traces = grouped.get(lid, [])
            rows = 0
            candidates: list[PolyInvariant] = []
            if traces:
                _, merged = merge_traces(traces)
                rows = len(merged)
                candidates = fit_invariants(traces, config.degree)
            results = [
                validate_fitted_invariant(unit, fn.name, cand, config)
                for cand in candidates[: config.max_candidates]
            ]
            for res in results:
                if res.accepted:
                    loop.specs.append(
                        SpecItem(
                            Directive.INV,
                            span=loop.span,
                            form=res.invariant.as_form(),
                        )
                    )
            out.append(LoopInference(fn.name, lid, learn.names, rows, results))
    return out


# ---------------------------------------------------------------------------
# Whole-unit obligation generation, solving, and export
# ---------------------------------------------------------------------------


def _as_unit(unit_or_source: Union[YulUnit, str], source_name: str) -> YulUnit:
    if isinstance(unit_or_source, YulUnit):
        return unit_or_source
    return parse_unit(unit_or_source, source_name)


def generate_obligations(
    unit: YulUnit, config: PipelineConfig
) -> tuple[list[Obligation], dict[str, VirFunction], UnitInfo, list[tuple[str, str]]]:
    """Translate every function and collect its obligations in unit order."""
    vfuncs, info = translate_unit(unit, config.translate_config())
    obligations: list[Obligation] = []
    errors: list[tuple[str, str]] = []
    for fn in unit.functions:
        try:
            obligations.extend(function_obligations(vfuncs[fn.name]))
        except MissingInvariant as e:
            errors.append((fn.name, str(e)))
    return obligations, vfuncs, info, errors


def verify_unit(
    unit_or_source: Union[YulUnit, str],
    config: Optional[PipelineConfig] = None,
    *,
    source_name: str = "<unit>",
) -> VerifyOutcome:
    """Run the full pipeline and solve all non-deferred obligations."""
    t0 = time.perf_counter()
    config = config or PipelineConfig()
    unit = _as_unit(unit_or_source, source_name)
    inference = infer_unit(unit, config) if config.infer else []
    findings = run_static_checks(unit)
    obligations, _, info, errors = generate_obligations(unit, config)
    active = [ob for ob in obligations if not ob.deferred]
    verdicts = {v.oid: v for v in discharge_all(active, config.solver_config())}
    return VerifyOutcome(
        unit=unit,
        info=info,
        obligations=obligations,
        verdicts=verdicts,
        findings=findings,
        inference=inference,
        errors=errors,
        elapsed=time.perf_counter() - t0,
    )


def export_unit(
    unit_or_source: Union[YulUnit, str],
    out_dir,
    config: Optional[PipelineConfig] = None,
    *,
    source_name: str = "<unit>",
) -> dict:
    """Generate obligations and write the deferred ones as theorem files."""
    config = config or PipelineConfig()
    unit = _as_unit(unit_or_source, source_name)
    if config.infer:
        infer_unit(unit, config)
    obligations, vfuncs, info, errors = generate_obligations(unit, config)
    manifest = export_deferred(obligations, vfuncs, info, out_dir)
    if errors:
        manifest["errors"] = [f"{fn}: {msg}" for fn, msg in errors]
    return manifest
