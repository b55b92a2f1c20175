"""Reproduction tables: run a pipeline and diff it against stored values."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import mpmath

from .groups import GAMMA1_6_COSETS, GroupElement
from .operators import OrbitImage, SlashEngine, atkin_lehner
from .periods import cocycle, magnetic_period_test, omega_split
from .real_analytic import RealAnalyticForm
from .residues import cm_point, residue_vector
from .scalars import DomainError, QuadScalar, clean, format_scalar

logger = logging.getLogger(__name__)

S = GroupElement(0, 1, -1, 0)
T = GroupElement(1, 1, 0, 1)
R = GroupElement(1, 0, 2, 1)
GAMMA_1 = GroupElement(-5, 1, -6, 1)
GAMMA_2 = GroupElement(7, -3, 12, -5)
PHI_GENERATOR = GroupElement(1, 0, -8, 1)
RHO = (1, 1, 1)

# name -> (order, {exponent: coefficient})
EXPANSIONS: Dict[str, Tuple[int, Dict[int, int]]] = {
    "phi": (9, {1: 1, 2: 0, 3: -132, 4: 0, 5: 5630, 6: 0, 7: -189672, 8: 0, 9: 5768181}),
    "E4j": (5, {1: 1, 2: -504, 3: 180252, 4: -56364992, 5: 16415391870}),
    "E6j": (5, {1: 1, 2: -1248, 3: 714996, 4: -307862528, 5: 114237828150}),
    "phitilde_t3": (5, {1: 256, 3: 256 * 2011260, 5: 256 * 2103414671870}),
    "phi0": (3, {0: 1, 1: 24, 2: 24, 3: 96}),
    "t": (1, {0: 1, 1: -8}),
    "j": (1, {-1: 1, 0: 744, 1: 196884}),
}

# source, n, closed form as a catalog expression
HECKE_CLOSED_FORMS = [
    ("E4j", 2, "(mul -72 (add 30375 (mul 7 j)) (pow (sub 54000 j) -2) E4)"),
    ("E4j", 3, "(mul 108 (add 4194304000000 (mul -1339392000 j) (mul 1669 (pow j 2)))"
               " (inv j) (pow (add 12288000 j) -2) E4)"),
]

# family, generator label, source -> (factor, target)
ACTION_TABLES: Dict[Tuple[str, ...], Dict[Tuple[str, str], Tuple[Fraction, str]]] = {
    ("C4", "D4a", "D4b"): {
        ("C4", "S"): (Fraction(1, 256), "D4a"), ("D4a", "S"): (Fraction(256), "C4"), ("D4b", "S"): (Fraction(1), "D4b"),
        ("C4", "T"): (Fraction(1), "C4"), ("D4a", "T"): (Fraction(-1), "D4b"), ("D4b", "T"): (Fraction(-1), "D4a"),
    },
    ("C6a", "D6a", "D6b"): {
        ("C6a", "S"): (Fraction(1, 512), "D6a"), ("D6a", "S"): (Fraction(512), "C6a"), ("D6b", "S"): (Fraction(1), "D6b"),
        ("C6a", "T"): (Fraction(1), "C6a"), ("D6a", "T"): (Fraction(1), "D6b"), ("D6b", "T"): (Fraction(1), "D6a"),
    },
    ("C6b", "D6c", "D6d"): {
        ("C6b", "S"): (Fraction(1, 512), "D6c"), ("D6c", "S"): (Fraction(512), "C6b"), ("D6d", "S"): (Fraction(1), "D6d"),
        ("C6b", "T"): (Fraction(1), "C6b"), ("D6c", "T"): (Fraction(1), "D6d"), ("D6d", "T"): (Fraction(1), "D6c"),
    },
}

# (source, Q, level) -> (factor, target)
ATKIN_LEHNER: Dict[Tuple[str, int, int], Tuple[Fraction, str]] = {
    ("C4", 2, 2): (Fraction(1), "C4"),
    ("C6a", 2, 2): (Fraction(1), "C6a"),
    ("C6b", 2, 2): (Fraction(1), "C6b"),
    ("H4a", 2, 6): (Fraction(1, 2), "H4b"),
    ("H4b", 2, 6): (Fraction(2), "H4a"),
    ("H6a", 2, 6): (Fraction(1, 2), "H6b"),
    ("H6b", 2, 6): (Fraction(2), "H6a"),
    ("H4a", 3, 6): (Fraction(1), "H4a"),
    ("H4b", 3, 6): (Fraction(1), "H4b"),
    ("H6a", 3, 6): (Fraction(1), "H6a"),
    ("H6b", 3, 6): (Fraction(1), "H6b"),
}

# residues: name, CM form of the pole, radicand, values in units of 1/(2 pi i)^(k/2)
ResidueRow = Tuple[str, Tuple[int, int, int], int, Sequence[Fraction]]
F = Fraction
RESIDUES_LEVEL_ONE: List[ResidueRow] = [
    ("phi", (8, -4, 1), 1, [F(-1), F(-1, 4), F(-1, 8)]),
    ("phi", (8, 4, 1), 1, [F(1), F(-1, 4), F(1, 8)]),
    ("E4j", RHO, -3, [F(-1, 288), F(1, 576), F(-1, 288)]),
    ("E6j", RHO, 1, [F(-1, 32), F(1, 64), F(-1, 64), F(1, 64), F(-1, 32)]),
]
RESIDUES_SL2Z: List[ResidueRow] = [
    ("F4", (1, 0, 1), -1, [F(1, 432), F(0), F(1, 432)]),
    ("F8a", RHO, -3, [F(5, 27), F(-5, 54), F(2, 27), F(-7, 108), F(2, 27), F(-5, 54), F(5, 27)]),
    ("F8b", (1, 1, 2), -7, [F(v, 2401) for v in (40, -20, 24, -26, 48, -80, 320)]),
    ("jlog", RHO, 1, [F(3)]),
]
RESIDUES_GAMMA0_2: List[ResidueRow] = [
    ("C4", (2, 2, 1), -1, [F(-1, 8), F(1, 16), F(-1, 16)]),
    ("C6a", (2, 0, 1), 1, [F(3, 4), F(0), F(1, 8), F(0), F(3, 16)]),
    ("C6b", (2, 2, 1), 1, [F(-3, 2), F(3, 4), F(-1, 2), F(3, 8), F(-3, 8)]),
]
RESIDUES_GAMMA1_6: List[ResidueRow] = [
    ("H4b", (3, -3, 1), -3, [F(-2, 3), F(-1, 3), F(-2, 9)]),
    ("H6b", (3, -3, 1), 1, [F(-36), F(-18), F(-10), F(-6), F(-4)]),
]

# periods: name, gamma, radicand, coefficients of X^(k-2-j) Y^j in units of (2 pi i)^(k/2), omega
PeriodRow = Tuple[str, GroupElement, int, Sequence[Fraction], Optional[str]]
PERIODS_LEVEL_ONE: List[PeriodRow] = [
    ("phi", PHI_GENERATOR, 1, [F(-1, 2), F(1, 8), F(0)], None),
    ("E4j", S, -3, [F(0), F(1, 576), F(0)], "0.0610392510075"),
    ("E6j", S, 1, [F(0), F(1, 1536), F(0), F(1, 1536), F(0)], "0.0876499825220"),
]
PERIODS_SL2Z: List[PeriodRow] = [
    ("F4", S, -1, [F(1, 1728), F(-4, 1728), F(1, 1728)], "-0.0424058145452"),
    ("F8a", S, -3, [F(v, 11664) for v in (0, -1, 0, -1, 0, -1, 0)], "0.1175032101096"),
    ("F8b", S, -7, [F(v, 43218) for v in (0, -6, 0, -5, 0, -6, 0)], "0.3506647091986"),
]
PERIODS_GAMMA0_2: List[PeriodRow] = [
    ("C4", R, -1, [F(-1, 32), F(0), F(0)], "0.2289913985443"),
    ("C6a", R, 1, [F(v, 128) for v in (0, -4, -6, -4, -1)], "-0.7888498426984"),
    ("C6b", R, 1, [F(v, 64) for v in (-2, -2, -1, 0, 0)], "0.2629499475661"),
]
PERIODS_GAMMA1_6: List[PeriodRow] = [
    ("H4b", GAMMA_1, -3, [F(1, 9), F(0), F(0)], "0.3906512064482"),
    ("H4b", GAMMA_2, -3, [F(13, 9), F(-10, 9), F(2, 9)], "0.3906512064482"),
    ("H6b", GAMMA_1, 1, [F(v, 12) for v in (13, -6, 1, 0, 0)], "0.4006856343865"),
    ("H6b", GAMMA_2, 1, [F(v, 6) for v in (401, -652, 398, -108, 11)], "0.4006856343865"),
]

# name -> (periods vanish, radicands of the residue lattice or None to skip)
VANISHING: Dict[str, Tuple[bool, Optional[List[int]]]] = {
    "phitilde": (False, [-2]),
    "phi": (True, None),
    "phitilde_t3": (True, None),
}

# name -> (omega, gamma, tau)
REAL_ANALYTIC: Dict[str, Tuple[str, GroupElement, Tuple[str, str]]] = {
    "E4j": ("0.0610392510075", S, ("0.1", "1.3")),
    "E6j": ("0.0876499825220", T, ("0.2", "1.2")),
}

OMEGA_DIGITS = 13


@dataclass
class TableOutcome:
    table: str
    passed: bool = True
    lines: List[str] = field(default_factory=list)

    def check(self, label: str, ok: bool, detail: str = "") -> None:
        self.passed = self.passed and ok
        self.lines.append(f"{'ok  ' if ok else 'FAIL'} {label}" + (f": {detail}" if detail else ""))

    def to_json(self) -> dict:
        return {"table": self.table, "passed": self.passed, "lines": self.lines}


TableRunner = Callable[["object", TableOutcome], None]
_TABLES: Dict[str, TableRunner] = {}


def _table(table_id: str) -> Callable[[TableRunner], TableRunner]:
    def decorator(func: TableRunner) -> TableRunner:
        _TABLES[table_id] = func
        return func

    return decorator


def table_ids() -> List[str]:
    return list(_TABLES)


def run_tables(table_id: str, context) -> List[TableOutcome]:
    """Run one table, or every table for ``"all"``."""

    if table_id == "all":
        ids = table_ids()
    elif table_id in _TABLES:
        ids = [table_id]
    else:
        raise DomainError(f"unknown table {table_id!r}; choose from {', '.join(table_ids())} or all")
    outcomes = []
    for tid in ids:
        outcome = TableOutcome(tid)
        logger.info("reproducing table %s", tid)
        _TABLES[tid](context, outcome)
        outcomes.append(outcome)
    return outcomes


# ---------------------------------------------------------------------------
# Comparison helpers
# ---------------------------------------------------------------------------


def _expected_scalar(value: Fraction, radicand: int):
    return clean(QuadScalar(Fraction(0), value, radicand)) if radicand != 1 and value else clean(value)


def _same_vector(actual: Optional[Sequence], expected: Sequence) -> bool:
    if actual is None or len(actual) != len(expected):
        return False
    return all(clean(a) == clean(e) for a, e in zip(actual, expected))


def _render(vector: Optional[Sequence]) -> str:
    if vector is None:
        return "unrecognized"
    return "(" + ", ".join(format_scalar(v) for v in vector) + ")"


def _close(value, expected: str) -> bool:
    return abs(mpmath.re(value) - mpmath.mpf(expected)) < mpmath.mpf(10) ** (-OMEGA_DIGITS + 1)


def _check_expansion(context, outcome: TableOutcome, name: str, order: int, expected: Dict[int, int]) -> None:
    f = context.catalog.expansion(name, order)
    actual = {e: clean(f.coefficient_at(e)) for e in expected}
    outcome.check(f"{name} to q^{order}", actual == expected, f.to_text())


def _check_residues(context, outcome: TableOutcome, rows: Sequence[ResidueRow]) -> None:
    for name, form, radicand, values in rows:
        vector = residue_vector(name, cm_point(form), ctx=context.ctx, catalog=context.catalog,
                                config=context.config, cm_form=form)
        expected = [_expected_scalar(v, radicand) for v in values]
        outcome.check(f"residues of {name} at {form}", _same_vector(vector.exact, expected), _render(vector.exact))


def _check_periods(context, outcome: TableOutcome, rows: Sequence[PeriodRow]) -> None:
    for name, gamma, radicand, values, omega in rows:
        C = cocycle(name, gamma, ctx=context.ctx, catalog=context.catalog, config=context.config)
        split = omega_split(C, d=radicand, max_denominator=context.config.reconstruction.max_denominator)
        expected = [_expected_scalar(v, radicand) for v in values]
        ok = _same_vector(split.exact, expected)
        detail = _render(split.exact)
        if omega is not None:
            found = split.omega if split.omega is not None else mpmath.mpf(0)
            ok = ok and _close(found, omega)
            detail += f", omega = {mpmath.nstr(mpmath.re(found), OMEGA_DIGITS)}"
        outcome.check(f"C_{name}({gamma})", ok, detail)


def _check_identity(outcome: TableOutcome, label: str, found: Optional[Tuple], expected: Tuple[Fraction, str]) -> None:
    ok = found is not None and clean(found[0]) == clean(expected[0]) and found[1] == expected[1]
    shown = "no match" if found is None else f"{format_scalar(found[0])} * {found[1]}"
    outcome.check(label, ok, shown)


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------


@_table("2")
def _expansions(context, outcome: TableOutcome) -> None:
    for name, (order, expected) in EXPANSIONS.items():
        _check_expansion(context, outcome, name, order, expected)


# width of tau/w -> |c| for the images c * phi(tau/w + u)
PHI_ORBIT_SHAPES = {Fraction(1): Fraction(1), Fraction(2): Fraction(1, 4), Fraction(8): Fraction(1, 64)}


def orbit_image_matches(image: OrbitImage, engine: SlashEngine, name: str = "phi") -> bool:
    """Whether an orbit image of ``name`` has one of the expected shapes."""

    if image.image is not None:
        return PHI_ORBIT_SHAPES.get(image.image.width) == abs(image.image.scale)
    if image.expansion is None or image.expansion.is_zero:
        return False
    found = engine.identify(image.expansion, [engine.catalog.get(name)])
    if found is None:
        return False
    c = clean(found[0])
    return isinstance(c, (int, Fraction)) and abs(c) == PHI_ORBIT_SHAPES[Fraction(1)]


@_table("3.1")
def _phi_orbit(context, outcome: TableOutcome) -> None:
    engine = SlashEngine(context.catalog, context.config, context.ctx.workers)
    images = engine.coset_orbit("phi")
    outcome.check("orbit of phi under SL2(Z)", len(images) == 12, f"{len(images)} images")
    for image in images:
        outcome.check(f"phi|{image.representative}", orbit_image_matches(image, engine), image.describe("phi"))


@_table("3.2")
def _hecke_closed_forms(context, outcome: TableOutcome) -> None:
    order = 100
    for name, n, closed in HECKE_CLOSED_FORMS:
        image = context.catalog.expand_expr(f"(hecke {name} {n})", order)
        target = context.catalog.expand_expr(closed, order)
        outcome.check(f"T_{n}({name})", image.agrees_with(target, order + 1), image.to_text())


@_table("3.3")
def _phi_atkin_lehner(context, outcome: TableOutcome) -> None:
    image = atkin_lehner("phi", 8, catalog=context.catalog, config=context.config)
    found = SlashEngine(context.catalog, context.config).identify(image, [context.catalog.get("phi")])
    _check_identity(outcome, "W_8 phi", found, (Fraction(-1), "phi"))


@_table("C.1.1")
def _gamma2_actions(context, outcome: TableOutcome) -> None:
    engine = SlashEngine(context.catalog, context.config, context.ctx.workers)
    labels = {"S": S, "T": T}
    for family, expected in ACTION_TABLES.items():
        table = engine.action_table(family, [S, T])
        for (source, label), value in expected.items():
            _check_identity(outcome, f"{source}|{label}", table.get((source, str(labels[label]))), value)


@_table("C.1.2")
def _gamma1_6_invariance(context, outcome: TableOutcome) -> None:
    engine = SlashEngine(context.catalog, context.config, context.ctx.workers)
    gamma13 = GAMMA1_6_COSETS[12]
    for name in ("H4a", "H6a"):
        image = engine.slash(name, gamma13)
        _check_identity(outcome, f"{name}|{gamma13}", engine.identify(image, [context.catalog.get(name)]),
                        (Fraction(1), name))


def _atkin_lehner_rows(context, outcome: TableOutcome, level: int) -> None:
    engine = SlashEngine(context.catalog, context.config)
    for (source, Q, N), value in ATKIN_LEHNER.items():
        if N != level:
            continue
        image = atkin_lehner(source, Q, N, catalog=context.catalog, config=context.config)
        found = engine.identify(image, [context.catalog.get(value[1])])
        _check_identity(outcome, f"W_{Q} {source}", found, value)


@_table("C.2.1")
def _gamma0_2_atkin_lehner(context, outcome: TableOutcome) -> None:
    _atkin_lehner_rows(context, outcome, 2)


@_table("C.2.2")
def _gamma1_6_atkin_lehner(context, outcome: TableOutcome) -> None:
    _atkin_lehner_rows(context, outcome, 6)


@_table("4")
def _residues_level_one(context, outcome: TableOutcome) -> None:
    _check_residues(context, outcome, RESIDUES_LEVEL_ONE)


@_table("C.3.1")
def _residues_sl2z(context, outcome: TableOutcome) -> None:
    _check_residues(context, outcome, RESIDUES_SL2Z)


@_table("C.3.2")
def _residues_gamma0_2(context, outcome: TableOutcome) -> None:
    _check_residues(context, outcome, RESIDUES_GAMMA0_2)


@_table("C.3.3")
def _residues_gamma1_6(context, outcome: TableOutcome) -> None:
    _check_residues(context, outcome, RESIDUES_GAMMA1_6)


@_table("C.4.1")
def _periods_sl2z(context, outcome: TableOutcome) -> None:
    _check_periods(context, outcome, PERIODS_SL2Z)


@_table("C.4.2")
def _periods_gamma0_2(context, outcome: TableOutcome) -> None:
    _check_periods(context, outcome, PERIODS_GAMMA0_2)


@_table("C.4.3")
def _periods_gamma1_6(context, outcome: TableOutcome) -> None:
    _check_periods(context, outcome, PERIODS_GAMMA1_6)


@_table("5")
def _vanishing_periods(context, outcome: TableOutcome) -> None:
    _check_periods(context, outcome, PERIODS_LEVEL_ONE)
    for name, (vanishes, radicands) in VANISHING.items():
        result = magnetic_period_test(name, ctx=context.ctx, catalog=context.catalog, config=context.config)
        ok = result.vanishes == vanishes
        if radicands is not None:
            ok = ok and result.lattice.radicands == radicands
        outcome.check(f"period test for {name}", ok,
                      f"{result.verdict}, lattice radicands {result.lattice.radicands}")


@_table("6")
def _real_analytic(context, outcome: TableOutcome) -> None:
    tol = mpmath.mpf(10) ** -(OMEGA_DIGITS - 1)
    for name, (omega, gamma, (x, y)) in REAL_ANALYTIC.items():
        form = RealAnalyticForm(name, catalog=context.catalog, ctx=context.ctx, config=context.config)
        outcome.check(f"omega of {name}", _close(form.omega, omega), mpmath.nstr(mpmath.re(form.omega), OMEGA_DIGITS))
        tau = mpmath.mpc(mpmath.mpf(x), mpmath.mpf(y))
        defect = form.check_modularity(gamma, tau)
        outcome.check(f"f_(r,s) of {name} under {gamma}", defect < tol, mpmath.nstr(defect, 5))

