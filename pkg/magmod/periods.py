"""Eichler cocycles, residue lattices, omega splits and the vanishing-period test.

Period polynomials have degree ``n = k - 2`` and are stored as coefficient
lists ``[c_0, ..., c_n]`` of ``X^(n-j) Y^j``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import mpmath
import sympy
from mpmath.calculus.quadrature import GaussLegendre

from .catalog import Catalog, CatalogEntry, default_catalog
from .config import Config, default_config
from .evaluator import EvalContext, Evaluator
from .groups import CongruenceSubgroup, GroupElement
from .residues import find_poles, pole_height_bound, residue_table
from .scalars import (
    ConvergenceError,
    DomainError,
    PathError,
    PoleProximityError,
    QuadScalar,
    Scalar,
    clean,
    format_scalar,
    quad_reconstruct,
    rational_reconstruct,
)

logger = logging.getLogger(__name__)

_X, _Y = sympy.symbols("X Y")
_NEGLIGIBLE_PANELS = 3
_MIN_PANEL_HEIGHT = mpmath.mpf(10) ** -6
_MAX_BISECTIONS = 48


# ---------------------------------------------------------------------------
# Polynomials in X, Y
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def slash_matrix(gamma: GroupElement, n: int) -> Tuple[Tuple[Fraction, ...], ...]:
    """Matrix M with (P|gamma)_i = sum_j M[i][j] P_j on degree-n polynomials."""

    a, b, c, d = (sympy.Rational(x.numerator, x.denominator) for x in gamma.entries())
    rows = [[Fraction(0)] * (n + 1) for _ in range(n + 1)]
    for j in range(n + 1):
        image = sympy.Poly(sympy.expand((a * _X + b * _Y) ** (n - j) * (c * _X + d * _Y) ** j), _X, _Y)
        for i in range(n + 1):
            value = sympy.Rational(image.coeff_monomial(_X ** (n - i) * _Y ** i))
            rows[i][j] = Fraction(int(value.p), int(value.q))
    return tuple(tuple(row) for row in rows)


def polynomial_slash(coefficients: Sequence, gamma: GroupElement) -> list:
    """P|gamma = P(aX + bY, cX + dY)."""

    n = len(coefficients) - 1
    matrix = slash_matrix(gamma, n)
    return [_dot(row, coefficients) for row in matrix]


def coboundary(coefficients: Sequence, gamma: GroupElement) -> list:
    """(d P)(gamma) = P|gamma - P."""

    return [x - y for x, y in zip(polynomial_slash(coefficients, gamma), coefficients)]


def _dot(row: Sequence[Fraction], values: Sequence):
    total = 0
    for weight, value in zip(row, values):
        if weight:
            if isinstance(value, (mpmath.mpc, mpmath.mpf)):
                total = total + mpmath.mpf(weight.numerator) / weight.denominator * value
            else:
                total = total + weight * value
    return total


def top_coboundary(gamma: GroupElement, n: int) -> List[Fraction]:
    """Coefficients of (d Y^n)(gamma) = (cX + dY)^n - Y^n."""

    return coboundary([Fraction(0)] * n + [Fraction(1)], gamma)


def format_polynomial(coefficients: Sequence[Scalar]) -> str:
    n = len(coefficients) - 1
    terms = []
    for j, value in enumerate(coefficients):
        if not value:
            continue
        monomial = "*".join(
            part for part in (_power("X", n - j), _power("Y", j)) if part
        )
        terms.append(f"({format_scalar(value)})" + (f"*{monomial}" if monomial else ""))
    return " + ".join(terms) if terms else "0"


def _power(symbol: str, exponent: int) -> str:
    if exponent == 0:
        return ""
    return symbol if exponent == 1 else f"{symbol}^{exponent}"


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------


@dataclass
class PeriodPolynomial:
    """C(gamma) = (2 pi i)^(k/2) * exact + omega * (d Y^(k-2))(gamma)."""

    gamma: GroupElement
    weight: int
    numeric: List[mpmath.mpc]
    exact: Optional[List[Scalar]] = None
    omega: Optional[mpmath.mpc] = None
    radicand: Optional[int] = None
    diagnostic: str = ""

    @property
    def ok(self) -> bool:
        return self.exact is not None

    def reassemble(self) -> List[mpmath.mpc]:
        scale = (2j * mpmath.pi) ** (mpmath.mpf(self.weight) / 2)
        top = top_coboundary(self.gamma, self.weight - 2)
        omega = self.omega or 0
        return [
            scale * _to_mpc(e) + omega * (mpmath.mpf(b.numerator) / b.denominator)
            for e, b in zip(self.exact or [0] * len(self.numeric), top)
        ]

    def to_json(self) -> dict:
        digits = max(15, mpmath.mp.dps)
        return {
            "gamma": self.gamma.to_json(),
            "weight": self.weight,
            "numeric": [[mpmath.nstr(v.real, digits), mpmath.nstr(v.imag, digits)] for v in self.numeric],
            "exact": [format_scalar(v) for v in self.exact] if self.exact is not None else None,
            "exact_text": format_polynomial(self.exact) if self.exact is not None else None,
            "scale": f"(2*pi*i)^{Fraction(self.weight, 2)}",
            "omega": [mpmath.nstr(self.omega.real, digits), mpmath.nstr(self.omega.imag, digits)]
            if self.omega is not None else None,
            "radicand": self.radicand,
            "diagnostic": self.diagnostic,
        }


@dataclass
class ResidueLattice:
    """Q-span of (2 pi i)^(k/2) * sqrt(d) for the listed radicands."""

    weight: int
    radicands: List[int] = field(default_factory=list)

    @property
    def trivial(self) -> bool:
        return not self.radicands

    @property
    def generators(self) -> List[Scalar]:
        return [clean(QuadScalar.sqrt(d)) for d in self.radicands]

    def basis(self) -> List[mpmath.mpc]:
        scale = (2j * mpmath.pi) ** (mpmath.mpf(self.weight) / 2)
        return [scale * mpmath.sqrt(mpmath.mpf(d)) for d in self.radicands]

    def to_json(self) -> dict:
        return {
            "weight": self.weight,
            "generators": [f"(2*pi*i)^{Fraction(self.weight, 2)}*{format_scalar(g)}" for g in self.generators],
        }


@dataclass
class PeriodTestResult:
    vanishes: bool
    lattice: ResidueLattice
    cocycles: List[PeriodPolynomial]
    defects: List[mpmath.mpf]
    diagnostic: str = ""

    @property
    def verdict(self) -> str:
        return "C_f = 0" if self.vanishes else "C_f != 0"

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "lattice": self.lattice.to_json(),
            "defects": [mpmath.nstr(d, 8) for d in self.defects],
            "cocycles": [c.to_json() for c in self.cocycles],
            "diagnostic": self.diagnostic,
        }


def _to_mpc(value) -> mpmath.mpc:
    if isinstance(value, QuadScalar):
        return value.to_mpc()
    if isinstance(value, (mpmath.mpc, mpmath.mpf)):
        return mpmath.mpc(value)
    value = Fraction(value)
    return mpmath.mpc(mpmath.mpf(value.numerator) / value.denominator)


def _mp(value: Fraction) -> mpmath.mpf:
    value = Fraction(value)
    return mpmath.mpf(value.numerator) / value.denominator


# ---------------------------------------------------------------------------
# Integration
# ---------------------------------------------------------------------------


class PeriodIntegrator:
    """Moments m_j = integral of tau^j f(tau) along a path, j = 0..n."""

    def __init__(self, entry: CatalogEntry, catalog: Catalog, ctx: EvalContext, config: Config) -> None:
        self.entry = entry
        self.catalog = catalog
        self.ctx = ctx
        self.config = config
        self.n = entry.weight - 2
        self.evaluator = Evaluator(catalog, ctx)
        self.rule = GaussLegendre(mpmath.mp)
        self.degree = config.periods.panel_degree
        self.tol = mpmath.mpf(2) ** (-(ctx.precision // 2 + ctx.guard_bits // 2))

    # panels --------------------------------------------------------------------
    def _nodes(self, degree: int):
        return self.rule.get_nodes(-1, 1, degree, mpmath.mp.prec)

    def _gauss(self, path, t0, t1, degree: int) -> List[mpmath.mpc]:
        """Moments over path(t), t in [t0, t1]; ``path`` returns (tau, dtau/dt)."""

        half = (t1 - t0) / 2
        middle = (t1 + t0) / 2
        sums = [mpmath.mpc(0)] * (self.n + 1)
        for x, w in self._nodes(degree):
            tau, speed = path(middle + half * x)
            value = self.evaluator.eval_entry(self.entry, tau) * speed * w * half
            power = mpmath.mpc(1)
            for j in range(self.n + 1):
                sums[j] += value * power
                power *= tau
        return sums

    def _adaptive(self, path, t0, t1, depth: int = 0) -> List[mpmath.mpc]:
        coarse = self._gauss(path, t0, t1, self.degree)
        fine = self._gauss(path, t0, t1, self.degree + 1)
        error = max(abs(a - b) for a, b in zip(coarse, fine))
        scale = max(mpmath.mpf(1), max(abs(v) for v in fine))
        if error <= self.tol * scale:
            return fine
        if depth >= _MAX_BISECTIONS:
            raise ConvergenceError(
                f"{self.entry.name}: panel [{mpmath.nstr(t0, 8)}, {mpmath.nstr(t1, 8)}] does not converge",
                {"error": mpmath.nstr(error, 5)},
            )
        middle = (t0 + t1) / 2
        left = self._adaptive(path, t0, middle, depth + 1)
        right = self._adaptive(path, middle, t1, depth + 1)
        return [a + b for a, b in zip(left, right)]

    def segment(self, start, end) -> List[mpmath.mpc]:
        start, end = mpmath.mpc(start), mpmath.mpc(end)
        delta = end - start
        return self._adaptive(lambda t: (start + t * delta, delta), mpmath.mpf(0), mpmath.mpf(1))

    def semicircle(self, centre, radius) -> List[mpmath.mpc]:
        """Right half circle from centre - i r to centre + i r."""

        centre = mpmath.mpc(centre)

        def path(theta):
            offset = radius * mpmath.expj(theta)
            return centre + offset, 1j * offset

        return self._adaptive(path, -mpmath.pi / 2, mpmath.pi / 2)

    # vertical paths to the cusp at infinity ---------------------------------------
    def split_height(self) -> mpmath.mpf:
        configured = _mp(self.config.periods.split_height)
        return max(configured, pole_height_bound(self.entry, self.catalog, self.ctx) + 1)

    def tail(self, x0, height) -> List[mpmath.mpc]:
        """Moments from x0 + i*height to i*infinity, term by term in the q-expansion."""

        bound = pole_height_bound(self.entry, self.catalog, self.ctx)
        grid = self.entry.grid
        terms = int(math.ceil(self.ctx.precision * math.log(2) * grid / (2 * math.pi * float(height - bound)))) + 4
        order = max(2, terms // grid + 2)
        expansion = self.catalog.expansion(self.entry, order)
        if expansion.lead is None or expansion.lead <= 0:
            raise PathError(f"{self.entry.name} does not vanish at i*infinity")
        tau_a = mpmath.mpc(x0 if isinstance(x0, mpmath.mpf) else _mp(x0), height)
        sums = [mpmath.mpc(0)] * (self.n + 1)
        for index, coefficient in expansion.items():
            alpha = 2j * mpmath.pi * index / grid
            base = mpmath.exp(alpha * tau_a) * _to_mpc(coefficient)
            for j in range(self.n + 1):
                # antiderivative of tau^j e^(alpha tau), which vanishes at i*infinity
                acc = mpmath.mpc(0)
                falling = mpmath.mpf(1)
                for l in range(j + 1):
                    acc += (-1) ** l * falling * tau_a ** (j - l) / alpha ** (l + 1)
                    falling *= j - l
                sums[j] -= base * acc
        return sums

    def on_path_poles(self, x0: Fraction, low, high) -> List[mpmath.mpf]:
        """Heights y in (low, high) of poles at x0 + i*y."""

        heights = []
        group = self.entry.group
        for record in find_poles(self.entry, self.ctx, self.catalog, self.config):
            if record.cm_form is None:
                continue
            disc = record.discriminant
            limit = 4 * abs(disc) * x0.denominator ** 2 + 4
            for A in range(1, limit + 1):
                B = -2 * A * x0
                if B.denominator != 1:
                    continue
                B = int(B)
                if (B * B - disc) % (4 * A):
                    continue
                C = (B * B - disc) // (4 * A)
                if math.gcd(math.gcd(A, B), C) != 1:
                    continue
                y = mpmath.sqrt(abs(disc)) / (2 * A)
                if low < y < high and group.equivalent(mpmath.mpc(_mp(x0), y), record.location):
                    heights.append(y)
        return sorted(set(heights))

    def vertical(self, x0: Fraction) -> List[mpmath.mpc]:
        """Moments from the cusp x0 up to i*infinity, detouring right of poles."""

        height = self.split_height()
        totals = self.tail(x0, height)
        x = _mp(x0)
        detour = _mp(self.config.periods.detour_radius)
        poles = self.on_path_poles(x0, _MIN_PANEL_HEIGHT, height)
        excluded = []
        for y in poles:
            radius = min(detour, y / 2)
            logger.debug("%s: detour of radius %s around %s", self.entry.name, mpmath.nstr(radius, 5),
                         mpmath.nstr(mpmath.mpc(x, y), 10))
            excluded.append((y - radius, y + radius))
            totals = _add(totals, self.semicircle(mpmath.mpc(x, y), radius))
        negligible = 0
        top = height
        while negligible < _NEGLIGIBLE_PANELS:
            bottom = top / 2
            if top < _MIN_PANEL_HEIGHT:
                raise ConvergenceError(
                    f"{self.entry.name}: integrand does not decay towards the cusp {x0}",
                    {"height": mpmath.nstr(top, 5)},
                )
            panel = [mpmath.mpc(0)] * (self.n + 1)
            for lo, hi in _subtract_intervals(bottom, top, excluded):
                panel = _add(panel, self.segment(mpmath.mpc(x, lo), mpmath.mpc(x, hi)))
            totals = _add(totals, panel)
            if max(abs(v) for v in panel) < self.tol and not any(lo < top and hi > bottom for lo, hi in excluded):
                negligible += 1
            else:
                negligible = 0
            top = bottom
        return totals


def _add(a: Sequence, b: Sequence) -> List:
    return [x + y for x, y in zip(a, b)]


def _subtract_intervals(lo, hi, excluded) -> List[Tuple[mpmath.mpf, mpmath.mpf]]:
    pieces = [(lo, hi)]
    for a, b in excluded:
        next_pieces = []
        for p, q in pieces:
            if b <= p or a >= q:
                next_pieces.append((p, q))
                continue
            if a > p:
                next_pieces.append((p, a))
            if b < q:
                next_pieces.append((b, q))
        pieces = next_pieces
    return pieces


# ---------------------------------------------------------------------------
# Cocycles
# ---------------------------------------------------------------------------


def _resolve(entry, catalog, ctx, config):
    catalog = catalog or default_catalog()
    ctx = ctx or EvalContext()
    config = config or default_config()
    entry = catalog.get(entry) if isinstance(entry, str) else entry
    return entry, catalog, ctx, config


def cocycle(entry, gamma: GroupElement, base=None, path_re: Optional[Fraction] = None,
            ctx: Optional[EvalContext] = None, catalog: Optional[Catalog] = None,
            config: Optional[Config] = None) -> PeriodPolynomial:
    """C(gamma) = (2 pi i)^(k-1)/(k-2)! * integral from gamma^-1(base) to base of (X - tau Y)^(k-2) f.

    ``base`` is ``None`` for i*infinity or a point of the upper half-plane.
    """

    entry, catalog, ctx, config = _resolve(entry, catalog, ctx, config)
    k = entry.weight
    if k < 2:
        raise DomainError("cocycles need weight at least 2")
    n = k - 2
    with mpmath.workprec(ctx.precision + ctx.guard_bits):
        integrator = PeriodIntegrator(entry, catalog, ctx, config)
        try:
            if base is None:
                x0 = gamma.cusp_preimage()
                if x0 is None:
                    moments = [mpmath.mpc(0)] * (n + 1)
                else:
                    if path_re is not None and Fraction(path_re) != x0:
                        raise PathError(f"path Re(tau) = {path_re} does not start at gamma^-1(i*infinity) = {x0}")
                    moments = integrator.vertical(x0)
            else:
                base = mpmath.mpc(base)
                start = gamma.inverse().act(base)
                moments = integrator.segment(start, base)
        except PoleProximityError as exc:
            raise PathError(f"{entry.name}: integration path meets a pole ({exc})") from exc
        prefactor = (2j * mpmath.pi) ** (k - 1) / mpmath.factorial(n)
        numeric = [prefactor * math.comb(n, j) * (-1) ** j * moments[j] for j in range(n + 1)]
    logger.info("cocycle of %s at %s computed", entry.name, gamma)
    return PeriodPolynomial(gamma, k, numeric)


# ---------------------------------------------------------------------------
# Residue lattice and omega split
# ---------------------------------------------------------------------------


def residue_lattice(entry, ctx: Optional[EvalContext] = None, catalog: Optional[Catalog] = None,
                    config: Optional[Config] = None) -> ResidueLattice:
    """Radicands d with (2 pi i)^(k/2) sqrt(d) Q inside the span of the residues."""

    entry, catalog, ctx, config = _resolve(entry, catalog, ctx, config)
    radicands: List[int] = []
    for record, vector in residue_table(entry, ctx, catalog, config):
        if not vector.ok:
            raise DomainError(
                f"{entry.name}: residues at {record.describe()} are not algebraic multiples of (2 pi i)^(-k/2)"
            )
        for value in vector.exact:
            if not value:
                continue
            d = value.d if isinstance(value, QuadScalar) else 1
            if d not in radicands:
                radicands.append(d)
    return ResidueLattice(entry.weight, sorted(radicands, key=abs))


def omega_split(C: PeriodPolynomial, gamma: Optional[GroupElement] = None, k: Optional[int] = None,
                d: int = 1, max_denominator: Optional[int] = None) -> PeriodPolynomial:
    """Write C as (2 pi i)^(k/2) sqrt(d) * rational + omega * (d Y^(k-2))(gamma).

    omega is taken perpendicular to (2 pi i)^(k/2) sqrt(d) in the complex plane.
    Failure is reported through ``diagnostic`` with ``exact`` left empty.
    """

    gamma = gamma or C.gamma
    k = k or C.weight
    max_denominator = max_denominator or default_config().reconstruction.max_denominator
    top = [_mp(b) for b in top_coboundary(gamma, k - 2)]
    scale = (2j * mpmath.pi) ** (mpmath.mpf(k) / 2) * mpmath.sqrt(mpmath.mpf(d))
    reduced = [v / scale for v in C.numeric]
    peak = max([abs(v) for v in reduced] + [mpmath.mpf(1)])
    tol = mpmath.mpf(2) ** (-(mpmath.mp.prec // 3)) * peak
    slots = sorted((j for j in range(len(top)) if top[j]), key=lambda j: -abs(top[j]))
    choices = [(None, mpmath.mpc(0))] if not slots else [(j, 1j * reduced[j].imag / top[j]) for j in slots]
    result = PeriodPolynomial(gamma, k, list(C.numeric))
    for slot, ratio in choices:
        remainder = [r - ratio * b for r, b in zip(reduced, top)]
        exact = []
        for value in remainder:
            q = rational_reconstruct(value, max_denominator, tol)
            if q is None:
                break
            exact.append(clean(QuadScalar(Fraction(0), q, d)) if d != 1 else clean(q))
        else:
            result.exact = exact
            result.omega = ratio * scale if slots else None
            result.radicand = d
            result.diagnostic = "" if slot is None else f"omega fixed by the coefficient of X^{k - 2 - slot}Y^{slot}"
            return result
    result.diagnostic = f"no rational remainder with radicand {d} for any choice of omega"
    logger.warning("omega split failed for %s: %s", gamma, result.diagnostic)
    return result


# ---------------------------------------------------------------------------
# Vanishing test
# ---------------------------------------------------------------------------


def _left_nullspace(generators: Sequence[GroupElement], n: int) -> List[List[sympy.Rational]]:
    blocks = []
    for gamma in generators:
        matrix = slash_matrix(gamma, n)
        for i in range(n + 1):
            blocks.append([sympy.Rational(matrix[i][j].numerator, matrix[i][j].denominator) - (1 if i == j else 0)
                           for j in range(n + 1)])
    stacked = sympy.Matrix(blocks)
    return [list(v) for v in stacked.T.nullspace()]


def generators_for(group: CongruenceSubgroup, config: Optional[Config] = None) -> List[GroupElement]:
    config = config or default_config()
    try:
        matrices = config.periods.generators[group.tag]
    except KeyError:
        raise DomainError(f"no generator set configured for {group.tag}") from None
    return [GroupElement.from_list(m) for m in matrices]


def magnetic_period_test(entry, generators: Optional[Sequence[GroupElement]] = None,
                         ctx: Optional[EvalContext] = None, catalog: Optional[Catalog] = None,
                         config: Optional[Config] = None) -> PeriodTestResult:
    """Decide whether C_f vanishes in H^1 modulo the residue lattice."""

    entry, catalog, ctx, config = _resolve(entry, catalog, ctx, config)
    generators = list(generators) if generators else generators_for(entry.group, config)
    n = entry.weight - 2
    lattice = residue_lattice(entry, ctx, catalog, config)
    if len(lattice.radicands) > 1:
        logger.warning("%s: residue lattice mixes radicands %s", entry.name, lattice.radicands)
    cocycles = [cocycle(entry, gamma, ctx=ctx, catalog=catalog, config=config) for gamma in generators]
    stacked = [v for c in cocycles for v in c.numeric]
    with mpmath.workprec(ctx.precision + ctx.guard_bits):
        peak = max([abs(v) for v in stacked] + [mpmath.mpf(1)])
        tol = mpmath.mpf(2) ** (-(ctx.precision // 3)) * peak
        defects = []
        for vector in _left_nullspace(generators, n):
            value = mpmath.fsum(_mp(Fraction(int(x.p), int(x.q))) * c for x, c in zip(vector, stacked))
            defects.append(_lattice_distance(value, lattice, config.reconstruction.max_denominator, tol))
        vanishes = all(d < tol for d in defects)
    logger.info("%s: periods %s", entry.name, "vanish" if vanishes else "do not vanish")
    return PeriodTestResult(vanishes, lattice, cocycles, defects)


def _lattice_distance(value: mpmath.mpc, lattice: ResidueLattice, max_denominator: int, tol) -> mpmath.mpf:
    """Distance of value from the lattice, zero when it is a recognized element."""

    if abs(value) < tol:
        return mpmath.mpf(0)
    for d, generator in zip(lattice.radicands, lattice.basis()):
        q = quad_reconstruct(value, 1, generator, max_denominator, tol)
        if q is not None:
            return abs(value - _to_mpc(q) * generator)
    return abs(value)
