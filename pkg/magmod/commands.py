"""Command execution layer for the magmod command line."""
from __future__ import annotations

import argparse
import json
import logging
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import mpmath

from .catalog import Catalog
from .config import Config
from .database import DatabaseManager
from .evaluator import EvalContext, Evaluator
from .groups import GroupElement
from .magnetic import check_depth, classify_strong, max_depth
from .operators import SlashEngine, atkin_lehner, hecke
from .periods import (
    cocycle,
    format_polynomial,
    generators_for,
    magnetic_period_test,
    omega_split,
    residue_lattice,
)
from .real_analytic import RealAnalyticForm, write_grid_csv
from .reproduce import run_tables
from .residues import residue_table
from .scalars import DomainError, format_scalar
from .search import SearchProblem, search

logger = logging.getLogger(__name__)


@dataclass
class CommandContext:
    config: Config
    catalog: Catalog
    ctx: EvalContext
    args: argparse.Namespace
    database: Optional[DatabaseManager] = None


@dataclass
class RunReport:
    """What one command computed, printable as JSON or text."""

    command: str
    inputs: Dict[str, Any]
    precision: List[int]
    outputs: Dict[str, Any] = field(default_factory=dict)
    lines: List[str] = field(default_factory=list)
    ok: bool = True
    timing: float = 0.0

    def to_json(self) -> dict:
        return {
            "command": self.command,
            "inputs": self.inputs,
            "precision": self.precision,
            "ok": self.ok,
            "outputs": self.outputs,
            "timing": round(self.timing, 3),
        }

    def render(self) -> str:
        return "\n".join(self.lines)


Handler = Callable[[CommandContext, RunReport], None]


class CommandRegistry:
    def __init__(self) -> None:
        self._handlers: Dict[str, Handler] = {}

    def register(self, name: str) -> Callable[[Handler], Handler]:
        def decorator(func: Handler) -> Handler:
            self._handlers[name] = func
            return func

        return decorator

    @property
    def names(self) -> List[str]:
        return sorted(self._handlers)

    def execute(self, name: str, context: CommandContext) -> RunReport:
        handler = self._handlers.get(name)
        if handler is None:
            raise DomainError(f"no handler registered for command {name!r}")
        inputs = {k: _jsonable(v) for k, v in sorted(vars(context.args).items())
                  if k not in ("handler", "verbose", "json", "no_cache")}
        report = RunReport(name, inputs, [context.ctx.precision])
        started = time.perf_counter()
        handler(context, report)
        report.timing = time.perf_counter() - started
        _log_run(context, report)
        return report


registry = CommandRegistry()


# ---------------------------------------------------------------------------
# Helper utilities
# ---------------------------------------------------------------------------

def _log_run(context: CommandContext, report: RunReport) -> None:
    if context.database is None:
        return
    try:
        context.database.log_run(report.command, report.inputs, report.to_json())
    except Exception:  # pragma: no cover
        logger.exception("Unable to persist run log entry")


def _jsonable(value: Any) -> Any:
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def parse_tau(text: str) -> mpmath.mpc:
    """``"x,y"`` with rational or decimal parts, Im > 0."""

    try:
        re_text, im_text = (part.strip() for part in text.split(","))
    except ValueError:
        raise DomainError(f"tau must be given as 'x,y', got {text!r}") from None
    tau = mpmath.mpc(_real(re_text), _real(im_text))
    if tau.imag <= 0:
        raise DomainError("tau must lie in the upper half-plane")
    return tau


def _real(text: str) -> mpmath.mpf:
    try:
        q = Fraction(text)
    except ValueError:
        raise DomainError(f"cannot read number {text!r}") from None
    return mpmath.mpf(q.numerator) / q.denominator


def parse_gamma(text: str) -> GroupElement:
    try:
        return GroupElement.parse(text)
    except (ValueError, TypeError) as exc:
        raise DomainError(f"cannot read matrix {text!r}: expected 'a,b,c,d'") from exc


def _nstr(value, digits: int = 20) -> str:
    value = mpmath.mpc(value)
    if value.imag == 0:
        return mpmath.nstr(value.real, digits)
    return f"{mpmath.nstr(value.real, digits)} + {mpmath.nstr(value.imag, digits)}*i"


def _nmax(context: CommandContext) -> int:
    return context.args.nmax or context.config.search.verify_nmax


# ---------------------------------------------------------------------------
# Handlers
# ---------------------------------------------------------------------------

@registry.register("list")
def _list(context: CommandContext, report: RunReport) -> None:
    entries = context.catalog.entries()
    report.outputs["entries"] = [e.summary() for e in entries]
    for e in entries:
        depth = "-" if e.depth is None else e.depth
        report.lines.append(f"{e.name:<12} {e.group.tag:<10} k={e.weight:<3} d={depth}  {e.description}")


@registry.register("expand")
def _expand(context: CommandContext, report: RunReport) -> None:
    f = context.catalog.expansion(context.args.name, context.args.order)
    report.outputs["expansion"] = f.to_json()
    report.outputs["text"] = f.to_text()
    report.lines.append(f"{context.args.name} = {f.to_text()}")


@registry.register("magnetic")
def _magnetic(context: CommandContext, report: RunReport) -> None:
    entry = context.catalog.get(context.args.name)
    n_max = _nmax(context)
    f = context.catalog.expansion(entry, math.ceil(n_max / entry.grid))
    depths = [context.args.depth] if context.args.depth else list(range(1, max(entry.weight, 2)))
    reports = [check_depth(f, d, n_max) for d in depths]
    report.outputs["reports"] = [r.to_json() for r in reports]
    for r in reports:
        report.lines.append(f"{entry.name}: depth {r.depth_tested} up to n = {n_max}: {r.verdict}"
                            + (f" (D = {r.bounding_denominator})" if r.consistent else f" ({r.witness})"))
    if not context.args.depth:
        best = max_depth(f, n_max, entry.weight)
        strong = classify_strong(entry, best, [p.order for p in entry.poles])
        report.outputs["max_depth"] = best
        report.outputs["classification"] = strong
        report.lines.append(f"{entry.name}: largest consistent depth {best}, {strong}")
    if entry.depth is not None:
        claimed = next((r for r in reports if r.depth_tested == entry.depth), None)
        report.ok = claimed is None or claimed.consistent


@registry.register("hecke")
def _hecke(context: CommandContext, report: RunReport) -> None:
    entry = context.catalog.get(context.args.name)
    n = context.args.n
    source = context.catalog.expansion(entry, context.args.order * n)
    if source.grid != 1:
        raise DomainError(f"{entry.name} lives on grid {source.grid}; Hecke operators need grid 1")
    image = hecke(source, n, entry.weight, entry.level)
    image = image.truncate(min(image.trunc, context.args.order + 1))
    report.outputs["expansion"] = image.to_json()
    report.lines.append(f"T_{n} {entry.name} = {image.to_text()}")


@registry.register("slash")
def _slash(context: CommandContext, report: RunReport) -> None:
    engine = SlashEngine(context.catalog, context.config, context.ctx.workers)
    gamma = parse_gamma(context.args.gamma)
    image = engine.slash(context.args.name, gamma, terms=context.args.order)
    report.outputs["expansion"] = image.to_json()
    report.lines.append(f"{context.args.name}|{gamma} = {image.to_text()}")
    entry = context.catalog.get(context.args.name)
    family = [e for e in context.catalog.entries() if e.group == entry.group and e.weight == entry.weight]
    match = engine.identify(image, family)
    if match is not None:
        report.outputs["identified"] = {"factor": format_scalar(match[0]), "name": match[1]}
        report.lines.append(f"  = {format_scalar(match[0])} * {match[1]}")


@registry.register("al")
def _al(context: CommandContext, report: RunReport) -> None:
    entry = context.catalog.get(context.args.name)
    image = atkin_lehner(entry, context.args.Q, context.args.level, catalog=context.catalog, config=context.config)
    report.outputs["expansion"] = image.to_json()
    report.lines.append(f"W_{context.args.Q} {entry.name} = {image.to_text()}")
    family = [e for e in context.catalog.entries() if e.group == entry.group and e.weight == entry.weight]
    match = SlashEngine(context.catalog, context.config).identify(image, family)
    if match is not None:
        report.outputs["identified"] = {"factor": format_scalar(match[0]), "name": match[1]}
        report.lines.append(f"  = {format_scalar(match[0])} * {match[1]}")


@registry.register("coset-orbit")
def _coset_orbit(context: CommandContext, report: RunReport) -> None:
    engine = SlashEngine(context.catalog, context.config, context.ctx.workers)
    images = engine.coset_orbit(context.args.name)
    report.outputs["images"] = [
        {"representative": str(i.representative), "image": i.describe(context.args.name)} for i in images
    ]
    report.lines.append(f"{len(images)} distinct images")
    report.lines.extend(f"  {i.representative}: {i.describe(context.args.name)}" for i in images)


@registry.register("eval")
def _eval(context: CommandContext, report: RunReport) -> None:
    tau = parse_tau(context.args.tau)
    value = Evaluator(context.catalog, context.ctx).eval_entry(context.args.name, tau)
    report.outputs["value"] = [mpmath.nstr(value.real, 30), mpmath.nstr(value.imag, 30)]
    report.lines.append(f"{context.args.name}({_nstr(tau, 10)}) = {_nstr(value, 30)}")


@registry.register("residues")
def _residues(context: CommandContext, report: RunReport) -> None:
    rows = residue_table(context.args.name, context.ctx, context.catalog, context.config)
    report.outputs["poles"] = [{"pole": p.to_json(), "residues": v.to_json()} for p, v in rows]
    for pole, vector in rows:
        report.lines.append(f"pole {pole.describe()} (order {pole.order}, orbit {pole.orbit})")
        if vector.ok:
            values = ", ".join(format_scalar(v) for v in vector.exact)
            report.lines.append(f"  1/(2*pi*i)^{Fraction(vector.weight, 2)} * ({values})")
        else:
            report.ok = False
            report.lines.append(f"  not recognized: {vector.diagnostic}")


def _split(context: CommandContext, C, radicand: int):
    split = omega_split(C, d=radicand, max_denominator=context.config.reconstruction.max_denominator)
    if not split.ok and radicand != 1:
        split = omega_split(C, d=1, max_denominator=context.config.reconstruction.max_denominator)
    return split


@registry.register("periods")
def _periods(context: CommandContext, report: RunReport) -> None:
    entry = context.catalog.get(context.args.name)
    gammas = [parse_gamma(g) for g in context.args.gamma] if context.args.gamma \
        else generators_for(entry.group, context.config)
    lattice = residue_lattice(entry, context.ctx, context.catalog, context.config)
    radicand = lattice.radicands[0] if lattice.radicands else 1
    results = []
    for gamma in gammas:
        C = cocycle(entry, gamma, ctx=context.ctx, catalog=context.catalog, config=context.config)
        split = _split(context, C, radicand)
        results.append(split)
        if split.ok:
            scale = f"(2*pi*i)^{Fraction(entry.weight, 2)}"
            omega = "" if split.omega is None else f", omega = {_nstr(split.omega, 13)}"
            report.lines.append(f"C({gamma}) = {scale} * [{format_polynomial(split.exact)}]{omega}")
        else:
            report.ok = False
            report.lines.append(f"C({gamma}): {split.diagnostic}")
    report.outputs["lattice"] = lattice.to_json()
    report.outputs["cocycles"] = [r.to_json() for r in results]


@registry.register("magnetic-period-test")
def _period_test(context: CommandContext, report: RunReport) -> None:
    result = magnetic_period_test(context.args.name, ctx=context.ctx, catalog=context.catalog,
                                  config=context.config)
    report.outputs.update(result.to_json())
    report.lines.append(f"{context.args.name}: {result.verdict}")
    report.lines.append("  residue lattice: " + (", ".join(result.lattice.to_json()["generators"]) or "0"))


@registry.register("frs")
def _frs(context: CommandContext, report: RunReport) -> None:
    form = RealAnalyticForm(context.args.name, catalog=context.catalog, ctx=context.ctx, config=context.config)
    report.outputs["omega"] = _nstr(form.omega, 20)
    report.lines.append(f"omega = {_nstr(form.omega, 20)}")
    if context.args.tau:
        sample = form.sample(parse_tau(context.args.tau))
        report.outputs["sample"] = sample.to_json()
        report.lines.append(json.dumps(sample.to_json()["frs"]))
        if context.args.check:
            deviation = form.check_modularity(parse_gamma(context.args.check), sample.tau)
            report.outputs["modularity_defect"] = mpmath.nstr(deviation, 8)
            report.lines.append(f"modularity defect under {context.args.check}: {mpmath.nstr(deviation, 8)}")
    if context.args.grid:
        parts = context.args.grid.split(",")
        if len(parts) != 5:
            raise DomainError("--grid expects x0,x1,y0,y1,n")
        x0, x1, y0, y1 = (_real(p) for p in parts[:4])
        samples = form.grid(x0, x1, y0, y1, int(parts[4]))
        report.outputs["grid_points"] = len(samples)
        if context.args.csv:
            write_grid_csv(samples, context.args.csv)
            report.lines.append(f"wrote {len(samples)} samples to {context.args.csv}")
        else:
            report.outputs["samples"] = [s.to_json() for s in samples]


@registry.register("search")
def _search(context: CommandContext, report: RunReport) -> None:
    problem = SearchProblem(
        context.args.group,
        context.args.weight,
        context.args.pole,
        context.args.depth,
        denominator_bound=context.args.denominator,
        constraints=context.args.constraints,
        n_max=context.args.nmax,
    )
    result = search(problem, context.catalog, context.config)
    report.outputs.update(result.to_json())
    report.lines.append(f"{problem.describe()}: {len(result.generators)} generators, "
                        f"constraints {result.constraint_counts}, stable = {result.stable}")
    for number, solution in enumerate(result.solutions, 1):
        tag = f" (= {solution.match_factor} * {solution.catalog_match})" if solution.catalog_match else ""
        report.lines.append(f"candidate {number}{tag}: {solution.expr}")


@registry.register("reproduce")
def _reproduce(context: CommandContext, report: RunReport) -> None:
    outcomes = run_tables(context.args.table, context)
    report.outputs["tables"] = [o.to_json() for o in outcomes]
    report.ok = all(o.passed for o in outcomes)
    for outcome in outcomes:
        report.lines.append(f"{outcome.table}: {'PASS' if outcome.passed else 'FAIL'}")
        report.lines.extend(f"  {line}" for line in outcome.lines)
