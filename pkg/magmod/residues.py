"""Pole location, Laurent orders and residue vectors of catalog entries."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

import mpmath
import sympy

from .catalog import Catalog, CatalogEntry, FormExpr, PoleSpec, default_catalog
from .config import Config, default_config
from .evaluator import EvalContext, Evaluator
from .groups import S, T, _short_words, reduce_to_fundamental_domain
from .scalars import (
    ConvergenceError,
    DomainError,
    MagmodError,
    PrecisionError,
    Scalar,
    format_scalar,
    quad_reconstruct,
    rational_reconstruct,
    squarefree_part,
)

logger = logging.getLogger(__name__)

_X = sympy.Symbol("x")
_CM_MAX_DENOMINATOR = 10**4
_SEED_X = [Fraction(i, 8) - Fraction(1, 2) for i in range(9)]
_SEED_Y = [Fraction(9, 10), Fraction(6, 5), Fraction(8, 5), Fraction(11, 5), Fraction(3)]


@dataclass
class PoleRecord:
    """One orbit of poles, represented by a point of maximal height."""

    location: mpmath.mpc
    order: int
    orbit: str
    cm_form: Optional[Tuple[int, int, int]] = None
    source: str = "hauptmodul"

    @property
    def discriminant(self) -> Optional[int]:
        if self.cm_form is None:
            return None
        a, b, c = self.cm_form
        return b * b - 4 * a * c

    def describe(self) -> str:
        if self.cm_form is None:
            return mpmath.nstr(self.location, 15)
        a, b, c = self.cm_form
        x = Fraction(-b, 2 * a)
        disc = self.discriminant
        return f"{x} + sqrt({disc})/{2 * a}"

    def to_json(self) -> dict:
        digits = max(15, mpmath.mp.dps)
        return {
            "location": [mpmath.nstr(self.location.real, digits), mpmath.nstr(self.location.imag, digits)],
            "order": self.order,
            "orbit": self.orbit,
            "cm_form": list(self.cm_form) if self.cm_form else None,
            "description": self.describe(),
            "source": self.source,
        }


@dataclass
class ResidueVector:
    """Residues of tau^m f at one pole for m = 0..k-2.

    ``exact`` holds rational multiples of sqrt(radicand); the numeric values
    equal ``exact[m] / (2 pi i)^(k/2)``.
    """

    location: mpmath.mpc
    weight: int
    numeric: List[mpmath.mpc]
    exact: Optional[List[Scalar]] = None
    radicand: Optional[int] = None
    diagnostic: str = ""

    @property
    def ok(self) -> bool:
        return self.exact is not None

    def scale(self) -> mpmath.mpc:
        return (2j * mpmath.pi) ** (-mpmath.mpf(self.weight) / 2)

    def to_json(self) -> dict:
        digits = max(15, mpmath.mp.dps)
        return {
            "location": [mpmath.nstr(self.location.real, digits), mpmath.nstr(self.location.imag, digits)],
            "numeric": [[mpmath.nstr(v.real, digits), mpmath.nstr(v.imag, digits)] for v in self.numeric],
            "exact": [format_scalar(v) for v in self.exact] if self.exact is not None else None,
            "scale": f"1/(2*pi*i)^{Fraction(self.weight, 2)}",
            "radicand": self.radicand,
            "diagnostic": self.diagnostic,
        }


# ---------------------------------------------------------------------------
# CM points
# ---------------------------------------------------------------------------


def recognize_cm(tau, tol=None) -> Optional[Tuple[int, int, int]]:
    """Primitive (a, b, c) with a tau^2 + b tau + c = 0, if tau is imaginary quadratic."""

    tau = mpmath.mpc(tau)
    tol = mpmath.mpf(2) ** (-(mpmath.mp.prec // 3)) if tol is None else tol
    x = rational_reconstruct(mpmath.mpc(tau.real), _CM_MAX_DENOMINATOR, tol)
    n = rational_reconstruct(mpmath.mpc(abs(tau) ** 2), _CM_MAX_DENOMINATOR, tol)
    if x is None or n is None:
        return None
    a = math.lcm((2 * x).denominator, n.denominator)
    b = -2 * x * a
    c = n * a
    b, c = int(b), int(c)
    g = math.gcd(math.gcd(a, b), c)
    return a // g, b // g, c // g


def cm_point(form: Sequence[int]) -> mpmath.mpc:
    return PoleSpec(tuple(form), 1).point()


# ---------------------------------------------------------------------------
# Pole location
# ---------------------------------------------------------------------------


class PoleFinder:
    """Locates pole orbits of catalog entries."""

    def __init__(self, catalog: Optional[Catalog] = None, ctx: Optional[EvalContext] = None,
                 config: Optional[Config] = None) -> None:
        self.catalog = catalog or default_catalog()
        self.ctx = ctx or EvalContext()
        self.config = config or default_config()
        self.evaluator = Evaluator(self.catalog, self.ctx)

    def find(self, entry: CatalogEntry) -> List[PoleRecord]:
        with mpmath.workprec(self.ctx.precision + self.ctx.guard_bits):
            if entry.hauptmodul and entry.denominator:
                candidates = self._hauptmodul_route(entry)
                source = "hauptmodul"
            elif _hecke_sources(entry.expr):
                candidates = self._hecke_route(entry)
                source = "hecke"
            elif entry.poles:
                candidates = [spec.point() for spec in entry.poles]
                source = "catalog"
            else:
                return []
            neighbours = [PoleRecord(mpmath.mpc(p), 0, "") for p in candidates]
            records = []
            for point in candidates:
                record = self._record(entry, point, source, neighbours)
                if record.order > 0 and not any(entry.group.equivalent(record.location, r.location) for r in records):
                    records.append(record)
        logger.info("%s: %d pole orbit(s) found by the %s route", entry.name, len(records), source)
        return records

    # routes --------------------------------------------------------------------
    def _hauptmodul_route(self, entry: CatalogEntry) -> List[mpmath.mpc]:
        try:
            poly = sympy.Poly(sympy.sympify(entry.denominator), _X)
        except (sympy.SympifyError, sympy.PolynomialError) as exc:
            raise DomainError(f"{entry.name}: denominator {entry.denominator!r} is not a polynomial in x") from exc
        _, factors = sympy.factor_list(poly)
        hauptmodul = self.catalog.get(entry.hauptmodul)
        points: List[mpmath.mpc] = []
        for factor, multiplicity in factors:
            coefficients = [_mp_rational(c) for c in factor.all_coeffs()]
            roots = [coefficients[1] * -1 / coefficients[0]] if len(coefficients) == 2 else \
                mpmath.polyroots(coefficients, maxsteps=200, extraprec=self.ctx.precision)
            for root in roots:
                logger.debug("%s: solving %s(tau) = %s (multiplicity %d)", entry.name, hauptmodul.name,
                             mpmath.nstr(root, 12), multiplicity)
                points.append(self._solve_hauptmodul(entry, hauptmodul, mpmath.mpc(root)))
        return points

    def _solve_hauptmodul(self, entry: CatalogEntry, hauptmodul: CatalogEntry, target: mpmath.mpc) -> mpmath.mpc:
        group = entry.group
        tol = mpmath.mpf(2) ** (-(self.ctx.precision // 2)) * max(1, abs(target))

        def residual(tau):
            return self.evaluator.eval_entry(hauptmodul, tau) - target

        for point in elliptic_points(group):
            try:
                if abs(residual(point)) < tol:
                    return point
            except MagmodError:
                continue
        seeds = []
        for rep in group.coset_representatives():
            for x in _SEED_X:
                for y in _SEED_Y:
                    z = rep.act(mpmath.mpc(mpmath.mpf(x.numerator) / x.denominator, mpmath.mpf(y.numerator) / y.denominator))
                    try:
                        seeds.append((abs(residual(z)), z))
                    except MagmodError:
                        continue
        seeds.sort(key=lambda pair: pair[0])
        diagnostics = {}
        for distance, seed in seeds[:6]:
            try:
                step = seed.imag / 64
                root = mpmath.findroot(residual, (seed, seed + mpmath.mpc(0, step)), maxsteps=200, verify=False)
                root = mpmath.mpc(root)
                if root.imag > 0 and abs(residual(root)) < tol:
                    return root
                diagnostics[mpmath.nstr(seed, 8)] = f"residual {mpmath.nstr(abs(residual(root)), 5)}"
            except (MagmodError, ValueError, ZeroDivisionError) as exc:
                diagnostics[mpmath.nstr(seed, 8)] = str(exc)
        raise ConvergenceError(
            f"{entry.name}: no point with {hauptmodul.name} = {mpmath.nstr(target, 12)}", diagnostics
        )

    def _hecke_route(self, entry: CatalogEntry) -> List[mpmath.mpc]:
        points: List[mpmath.mpc] = []
        for name, n in _hecke_sources(entry.expr):
            for record in self.find(self.catalog.get(name)):
                for a in range(1, n + 1):
                    if n % a:
                        continue
                    d = n // a
                    for b in range(d):
                        points.append((a * record.location + b) / d)
        for name in _plain_refs(entry.expr):
            points.extend(record.location for record in self.find(self.catalog.get(name)))
        return points

    # records -------------------------------------------------------------------
    def _record(self, entry: CatalogEntry, point: mpmath.mpc, source: str,
                neighbours: Sequence[PoleRecord]) -> PoleRecord:
        group = entry.group
        for spec in entry.poles:
            if group.equivalent(point, spec.point()):
                location, form = spec.point(), spec.form
                break
        else:
            location = group.canonical_point(point)
            form = recognize_cm(location)
        radius = contour_radius(entry, location, neighbours, self.config)
        order = laurent_order(entry, location, self.ctx, self.catalog, self.config, radius=radius)
        orbit = f"{group.tag}*{list(form) if form else mpmath.nstr(location, 10)}"
        return PoleRecord(location, order, orbit, form, source)


def _mp_rational(value) -> mpmath.mpf:
    value = sympy.Rational(value)
    return mpmath.mpf(int(value.p)) / int(value.q)


def _hecke_sources(expr: FormExpr) -> List[Tuple[str, int]]:
    if expr.op == "hecke":
        return [(expr.args[0], expr.args[1])]
    found: List[Tuple[str, int]] = []
    for arg in expr.args:
        if isinstance(arg, FormExpr):
            found.extend(_hecke_sources(arg))
    return found


def _plain_refs(expr: FormExpr) -> List[str]:
    if expr.op == "ref":
        return [expr.args[0]]
    if expr.op == "hecke":
        return []
    found: List[str] = []
    for arg in expr.args:
        if isinstance(arg, FormExpr):
            found.extend(_plain_refs(arg))
    return found


def elliptic_points(group) -> List[mpmath.mpc]:
    """Fixed points of the elliptic elements of ``group``, one per coset."""

    rho = mpmath.mpc(-0.5, mpmath.sqrt(3) / 2)
    st = S @ T
    points = []
    for rep in group.coset_representatives():
        inverse = rep.inverse()
        if group.contains(rep @ S @ inverse):
            points.append(rep.act(mpmath.mpc(0, 1)))
        if group.contains(rep @ st @ inverse):
            points.append(rep.act(rho))
    return points


_POLE_CACHE: Dict[Tuple[int, str, int], List[PoleRecord]] = {}


def find_poles(entry: Union[str, CatalogEntry], ctx: Optional[EvalContext] = None,
               catalog: Optional[Catalog] = None, config: Optional[Config] = None) -> List[PoleRecord]:
    catalog = catalog or default_catalog()
    ctx = ctx or EvalContext()
    entry = catalog.get(entry) if isinstance(entry, str) else entry
    key = (id(catalog), entry.name, ctx.precision)
    if key not in _POLE_CACHE:
        _POLE_CACHE[key] = PoleFinder(catalog, ctx, config).find(entry)
    return _POLE_CACHE[key]


def pole_height_bound(entry: CatalogEntry, catalog: Optional[Catalog] = None,
                      ctx: Optional[EvalContext] = None) -> mpmath.mpf:
    """Largest height reached by any pole of ``entry`` under SL2(Z)."""

    heights = [reduce_to_fundamental_domain(r.location)[0].imag for r in find_poles(entry, ctx, catalog)]
    return max(heights, default=mpmath.mpf(0))


# ---------------------------------------------------------------------------
# Contour integrals
# ---------------------------------------------------------------------------


def contour_radius(entry: CatalogEntry, tau0, poles: Sequence[PoleRecord], config: Optional[Config] = None):
    """Half the distance to the nearest other pole or the real axis, capped."""

    config = config or default_config()
    cap = config.residues.radius_cap
    radius = min(mpmath.mpf(cap.numerator) / cap.denominator, mpmath.mpc(tau0).imag / 2)
    tau0 = mpmath.mpc(tau0)
    reduced, g = reduce_to_fundamental_domain(tau0)
    back = g.inverse()
    for record in poles:
        base = reduce_to_fundamental_domain(record.location)[0]
        for sigma in _short_words():
            for shift in (-1, 0, 1):
                image = back.act(sigma.act(base) + shift)
                distance = abs(image - tau0)
                if distance > mpmath.mpf(2) ** (-(mpmath.mp.prec // 3)):
                    radius = min(radius, distance / 2)
    return radius


def _circle_samples(entry: CatalogEntry, tau0, radius, ctx: EvalContext, catalog: Catalog,
                    config: Config) -> Tuple[List[mpmath.mpc], List[mpmath.mpc], List[mpmath.mpc]]:
    count = config.residues.points_per_bit * ctx.precision
    offsets = [radius * mpmath.expjpi(mpmath.mpf(2 * j) / count) for j in range(count)]
    points = [tau0 + w for w in offsets]
    values = Evaluator(catalog, ctx).eval_many(entry, points)
    return points, values, offsets


def laurent_coefficients(entry, tau0, ctx: Optional[EvalContext] = None, catalog: Optional[Catalog] = None,
                         config: Optional[Config] = None, terms: Optional[int] = None,
                         radius=None) -> Tuple[List[mpmath.mpc], List[mpmath.mpf]]:
    """Principal-part coefficients c_(-1), c_(-2), ... and their noise floors."""

    catalog = catalog or default_catalog()
    ctx = ctx or EvalContext()
    config = config or default_config()
    entry = catalog.get(entry) if isinstance(entry, str) else entry
    terms = terms or 2 * entry.weight + 4
    with mpmath.workprec(ctx.precision + ctx.guard_bits):
        tau0 = mpmath.mpc(tau0)
        if radius is None:
            radius = min(mpmath.mpf(1) / 16, tau0.imag / 2)
        _, values, offsets = _circle_samples(entry, tau0, radius, ctx, catalog, config)
        peak = max(abs(v) for v in values)
        count = len(values)
        coefficients, floors = [], []
        for j in range(terms):
            coefficients.append(mpmath.fsum(v * w ** (j + 1) for v, w in zip(values, offsets)) / count)
            floors.append(mpmath.mpf(2) ** (-(ctx.precision // 2)) * peak * radius ** (j + 1))
    return coefficients, floors


def laurent_order(entry, tau0, ctx: Optional[EvalContext] = None, catalog: Optional[Catalog] = None,
                  config: Optional[Config] = None, radius=None) -> int:
    """Pole order at tau0, 0 at a regular point."""

    coefficients, floors = laurent_coefficients(entry, tau0, ctx, catalog, config, radius=radius)
    significant = [j for j, (c, floor) in enumerate(zip(coefficients, floors)) if abs(c) > floor]
    if not significant:
        return 0
    if significant[-1] == len(coefficients) - 1:
        raise PrecisionError("Laurent moments do not decay; order is ambiguous", significant[-1])
    return significant[-1] + 1


def residue_vector(entry, tau0, k: Optional[int] = None, ctx: Optional[EvalContext] = None,
                   catalog: Optional[Catalog] = None, config: Optional[Config] = None,
                   radius=None, cm_form: Optional[Sequence[int]] = None) -> ResidueVector:
    """Residues of tau^m f(tau) for m = 0..k-2, with exact recognition."""

    catalog = catalog or default_catalog()
    ctx = ctx or EvalContext()
    config = config or default_config()
    entry = catalog.get(entry) if isinstance(entry, str) else entry
    k = entry.weight if k is None else k
    with mpmath.workprec(ctx.precision + ctx.guard_bits):
        tau0 = mpmath.mpc(tau0)
        if radius is None:
            radius = contour_radius(entry, tau0, find_poles(entry, ctx, catalog, config), config)
        points, values, offsets = _circle_samples(entry, tau0, radius, ctx, catalog, config)
        count = len(points)
        numeric = [
            mpmath.fsum(p ** m * v * w for p, v, w in zip(points, values, offsets)) / count
            for m in range(k - 1)
        ]
        form = tuple(cm_form) if cm_form is not None else recognize_cm(tau0)
        vector = ResidueVector(tau0, k, numeric)
        _reconstruct_residues(vector, form, config)
    if not vector.ok:
        logger.warning("%s: residues at %s not recognized: %s", entry.name, mpmath.nstr(tau0, 10), vector.diagnostic)
    return vector


def _reconstruct_residues(vector: ResidueVector, form, config: Config) -> None:
    scale = vector.scale()
    max_den = config.reconstruction.max_denominator
    tol = mpmath.mpf(2) ** (-(mpmath.mp.prec // 2)) * max(1, max(abs(v) for v in vector.numeric))
    radicands = [1]
    if form is not None:
        a, b, c = form
        radicands.append(squarefree_part(b * b - 4 * a * c))
    for d in radicands:
        exact = [quad_reconstruct(v, d, scale, max_den, tol) for v in vector.numeric]
        if all(x is not None for x in exact):
            vector.exact, vector.radicand = exact, d
            return
    # per component, mixing radicands
    mixed = []
    for v in vector.numeric:
        found = None
        for d in radicands:
            found = quad_reconstruct(v, d, scale, max_den, tol)
            if found is not None:
                break
        mixed.append(found)
    if all(x is not None for x in mixed):
        vector.exact = mixed
        vector.diagnostic = "components use different radicands"
        return
    vector.diagnostic = f"no rational multiple of sqrt(d)/(2 pi i)^{Fraction(vector.weight, 2)} for d in {radicands}"


def residue_table(entry, ctx: Optional[EvalContext] = None, catalog: Optional[Catalog] = None,
                  config: Optional[Config] = None) -> List[Tuple[PoleRecord, ResidueVector]]:
    catalog = catalog or default_catalog()
    poles = find_poles(entry, ctx, catalog, config)
    return [
        (record, residue_vector(entry, record.location, ctx=ctx, catalog=catalog, config=config, cm_form=record.cm_form))
        for record in poles
    ]
