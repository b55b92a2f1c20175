"""Hecke operators, the slash action, Atkin-Lehner involutions and coset orbits.

Hecke operators act on coefficients exactly.  The slash action is numeric:
``f|gamma`` is sampled on a horizontal line, Fourier-inverted and the
coefficients are recognized as exact numbers along a precision ladder.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

import mpmath
from sympy import divisors

from .catalog import Catalog, CatalogEntry, default_catalog
from .config import Config, default_config
from .evaluator import EvalContext, Evaluator
from .groups import (
    CongruenceSubgroup,
    DirichletCharacter,
    GroupElement,
    atkin_lehner_matrix,
    trivial_character,
)
from .qseries import FourierExpansion
from .residues import pole_height_bound
from .scalars import (
    DomainError,
    PrecisionError,
    QuadScalar,
    TruncationError,
    clean,
    format_scalar,
    rational_reconstruct,
    stable_reconstruct,
    to_mpc,
)

logger = logging.getLogger(__name__)

_LOG2 = math.log(2)


# ---------------------------------------------------------------------------
# Hecke operators
# ---------------------------------------------------------------------------


def hecke(
    f: FourierExpansion,
    n: int,
    k: int,
    N: int = 1,
    chi: Optional[DirichletCharacter] = None,
) -> FourierExpansion:
    """T_n on coefficients: b_m = sum_{e | (n, m)} chi(e) e^(k-1) a_(nm/e^2)."""

    if n < 1:
        raise DomainError("Hecke index must be positive")
    if math.gcd(n, N) != 1:
        raise DomainError(f"T_{n} needs gcd(n, N) = 1, got N = {N}")
    if f.grid != 1:
        normalized = f.normalized()
        if normalized.grid != 1:
            raise DomainError("Hecke operators act on expansions in integral powers of q")
        f = normalized
    chi = chi or trivial_character(N)
    trunc = f.trunc // n
    if trunc <= 0:
        raise TruncationError(f"T_{n} needs truncation above {n}, got {f.trunc}")
    if f.is_zero:
        return FourierExpansion.zero(1, trunc)
    lead = f.lead
    start = min(n * lead, lead // n) if lead < 0 else lead // n
    coeffs: Dict[int, object] = {}
    for m in range(start, trunc):
        total = 0
        for e in divisors(math.gcd(n, abs(m)) if m else n):
            index = n * m // (e * e)
            value = f.coeffs.get(index)
            if value is not None:
                total = total + chi(int(e)) * Fraction(int(e)) ** (k - 1) * value
        if total != 0:
            coeffs[m] = total
    return FourierExpansion(1, coeffs, trunc)


# ---------------------------------------------------------------------------
# Numeric slash
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SamplingPlan:
    grid: int
    height: mpmath.mpf
    height_bound: mpmath.mpf
    lo: int
    hi: int
    samples: int
    extra_bits: int = 0


@dataclass(frozen=True)
class ScaledShift:
    """The function c * f(tau / w + u)."""

    scale: Fraction
    width: Fraction
    shift: Fraction

    def describe(self, name: str) -> str:
        argument = "tau" if self.width == 1 else f"tau/{self.width}"
        if self.shift:
            argument += f" + {self.shift}"
        return f"{format_scalar(self.scale)}*{name}({argument})"


@dataclass(frozen=True)
class OrbitImage:
    representative: GroupElement
    expansion: Optional[FourierExpansion]
    image: Optional[ScaledShift]

    def describe(self, name: str) -> str:
        if self.image is not None:
            return self.image.describe(name)
        return self.expansion.to_text() if self.expansion is not None else "?"


class SlashEngine:
    """Numeric slash action for catalog entries."""

    def __init__(self, catalog: Optional[Catalog] = None, config: Optional[Config] = None,
                 workers: Optional[int] = None) -> None:
        self.catalog = catalog or default_catalog()
        self.config = config or default_config()
        self.workers = workers if workers is not None else self.config.compute.workers

    # planning ----------------------------------------------------------------
    def plan(self, entry: CatalogEntry, gamma: GroupElement, grid: int, bits: int,
             terms: Optional[int] = None) -> SamplingPlan:
        settings = self.config.slash
        margin = mpmath.mpf(settings.height_margin.numerator) / settings.height_margin.denominator
        floor = mpmath.mpf(settings.min_image_height.numerator) / settings.min_image_height.denominator
        bound = pole_height_bound(entry, self.catalog, EvalContext(precision=bits)) * float(gamma.det)
        height = max(bound + margin, floor)
        terms = settings.terms if terms is None else terms
        # window in steps of q^(1/grid); terms counts whole powers of q
        hi = max(grid + 1, terms * grid)
        lo = -2 * grid
        # coefficient n is amplified by exp(2 pi n h / grid); half the bits must survive
        amplified = 2 * math.pi * hi * float(height) / (grid * _LOG2)
        extra = max(0, int(math.ceil(amplified - bits / 2)))
        target = (bits + extra) * _LOG2 * grid / (4 * math.pi)
        samples = (hi - lo) + int(math.ceil((target + hi * float(bound)) / float(height - bound))) + 8
        return SamplingPlan(grid, height, bound, lo, hi, samples, extra)

    def sample(self, entry: CatalogEntry, gamma: GroupElement, k: int, plan: SamplingPlan,
               bits: int) -> Dict[int, mpmath.mpc]:
        """Numeric Fourier coefficients of f|gamma on the window of ``plan``."""

        ctx = EvalContext(precision=bits + plan.extra_bits, workers=self.workers)
        evaluator = Evaluator(self.catalog, ctx)
        with mpmath.workprec(ctx.precision + ctx.guard_bits):
            M, N, h = plan.grid, plan.samples, plan.height
            points = [mpmath.mpc(mpmath.mpf(M) * j / N, h) for j in range(N)]
            images = [gamma.act(tau) for tau in points]
            values = evaluator.eval_many(entry, images)
            det = gamma.det
            factor = (mpmath.mpf(det.numerator) / det.denominator) ** (mpmath.mpf(k) / 2)
            slashed = [factor * v / gamma.automorphy(tau) ** k for v, tau in zip(values, points)]
            coefficients: Dict[int, mpmath.mpc] = {}
            for n in range(plan.lo, plan.hi):
                root = mpmath.expjpi(mpmath.mpf(-2 * n) / N)
                acc = mpmath.mpc(0)
                power = mpmath.mpc(1)
                for value in slashed:
                    acc += value * power
                    power *= root
                coefficients[n] = acc / N * mpmath.exp(2 * mpmath.pi * n * h / M)
        logger.debug("sampled %s|%s at %d points, height %s", entry.name, gamma, N, mpmath.nstr(h, 5))
        return coefficients

    # recognition ---------------------------------------------------------------
    def _tolerance(self, value) -> mpmath.mpf:
        bits = self.config.reconstruction.tolerance_bits or mpmath.mp.prec // 2
        return mpmath.mpf(2) ** (-bits) * max(1, abs(value))

    def recognize_exact(self, coefficients: Dict[int, mpmath.mpc], plan: SamplingPlan) -> Optional[FourierExpansion]:
        max_den = self.config.reconstruction.max_denominator
        exact: Dict[int, object] = {}
        for n, value in coefficients.items():
            tol = self._tolerance(value)
            re = rational_reconstruct(mpmath.mpc(value.real), max_den, tol)
            im = rational_reconstruct(mpmath.mpc(value.imag), max_den, tol)
            if re is None or im is None:
                logger.debug("coefficient %d of the slash is not in Q(i)", n)
                return None
            exact[n] = clean(QuadScalar(re, im, -1)) if im else clean(re)
        return FourierExpansion(plan.grid, exact, plan.hi)

    def slash(self, entry: Union[str, CatalogEntry], gamma: GroupElement, k: Optional[int] = None,
              grid: Optional[int] = None, terms: Optional[int] = None) -> FourierExpansion:
        entry = self.catalog.get(entry) if isinstance(entry, str) else entry
        k = entry.weight if k is None else k
        if k % 2 and gamma.det != 1:
            raise DomainError("odd weight slash needs a determinant one matrix")
        grid = grid or max(entry.level, entry.grid)
        ladder = self.config.precision.ladder
        plan = self.plan(entry, gamma, grid, ladder[0], terms)
        found_index: List[Optional[int]] = [None]

        def recognize(payload):
            result = self.recognize_exact(payload, plan)
            if result is None:
                found_index[0] = next(iter(payload), None)
            return result

        try:
            exact, _, bits = stable_reconstruct(lambda b: self.sample(entry, gamma, k, plan, b), recognize, ladder)
        except PrecisionError as exc:
            raise PrecisionError(f"{entry.name}|{gamma}: {exc}", found_index[0]) from exc
        logger.info("%s|%s recognized at %d bits", entry.name, gamma, bits)
        return exact

    def recognize_image(self, coefficients: Dict[int, mpmath.mpc], plan: SamplingPlan,
                        entry: CatalogEntry) -> Optional[ScaledShift]:
        """Write sampled coefficients as c * f(tau/w + u) with rational c."""

        base = self.catalog.expansion(entry, max(4, plan.hi // plan.grid + 2))
        if base.is_zero:
            return None
        scale = max(abs(v) for v in coefficients.values()) or mpmath.mpf(1)
        tol = self._tolerance(scale) if scale > 1 else self._tolerance(1)
        nonzero = [n for n in sorted(coefficients) if abs(coefficients[n]) > tol]
        if not nonzero:
            return None
        n0 = nonzero[0]
        m0 = base.lead
        if n0 == 0 or m0 == 0 or (n0 > 0) != (m0 > 0):
            return None
        width = Fraction(m0 * plan.grid, n0 * base.grid)
        denominator = plan.grid * max(entry.level, 1)
        max_den = self.config.reconstruction.max_denominator
        for j in range(denominator * base.grid):
            shift = Fraction(j, denominator)

            def phase(m: int) -> mpmath.mpc:
                return mpmath.expjpi(2 * mpmath.mpf(m * shift.numerator) / (shift.denominator * base.grid))

            c_numeric = coefficients[n0] / (to_mpc(base.coeffs[m0]) * phase(m0))
            c = rational_reconstruct(c_numeric, max_den, self._tolerance(c_numeric))
            if c is None:
                continue
            if self._matches(coefficients, base, c, width, plan, phase, tol):
                return ScaledShift(c, width, shift)
        return None

    def _matches(self, coefficients, base: FourierExpansion, c: Fraction, width: Fraction,
                 plan: SamplingPlan, phase, tol) -> bool:
        cm = mpmath.mpf(c.numerator) / c.denominator
        for n, value in coefficients.items():
            # exponent n/M corresponds to m / (w * M_f)
            m = Fraction(n) * width * base.grid / plan.grid
            if m.denominator == 1 and m.numerator < base.trunc:
                expected = cm * to_mpc(base.coeffs.get(m.numerator, 0)) * phase(m.numerator)
            elif m.denominator == 1:
                continue
            else:
                expected = 0
            if abs(value - expected) > tol * max(1, abs(expected)):
                return False
        return True

    def coset_orbit(self, entry: Union[str, CatalogEntry],
                    group: Optional[CongruenceSubgroup] = None) -> List[OrbitImage]:
        entry = self.catalog.get(entry) if isinstance(entry, str) else entry
        group = group or entry.group
        k = entry.weight
        grid = max(group.level, entry.grid)
        ladder = self.config.precision.ladder
        images: List[OrbitImage] = []
        for rep in group.coset_representatives():
            plan = self.plan(entry, rep, grid, ladder[0])

            def recognize(payload, plan=plan):
                exact = self.recognize_exact(payload, plan)
                if exact is not None:
                    return ("exact", exact)
                image = self.recognize_image(payload, plan, entry)
                return None if image is None else ("image", image)

            (kind, value), _, _ = stable_reconstruct(
                lambda b, rep=rep, plan=plan: self.sample(entry, rep, k, plan, b), recognize, ladder
            )
            if kind == "exact":
                candidate = OrbitImage(rep, value, None)
            else:
                candidate = OrbitImage(rep, None, value)
            if not any(_same_image(candidate, seen) for seen in images):
                images.append(candidate)
        logger.info("orbit of %s under %s has %d distinct images", entry.name, group.tag, len(images))
        return images

    def identify(self, image: FourierExpansion, candidates: Sequence[CatalogEntry],
                 ) -> Optional[Tuple[Fraction, str]]:
        """The first candidate g with image = c*g for a scalar c, as (c, name)."""

        order = max(image.trunc // image.grid - 1, 1)
        for other in candidates:
            target = self.catalog.expansion(other, order)
            if image.grid % target.grid:
                continue
            c = _proportionality(image, target.regrid(image.grid))
            if c is not None:
                return c, other.name
        return None

    def action_table(self, names: Sequence[str], generators: Sequence[GroupElement],
                     ) -> Dict[Tuple[str, str], Tuple[Fraction, str]]:
        """Recognize each f|gamma as c*g with g in the family ``names``."""

        entries = [self.catalog.get(n) for n in names]
        grid = max(max(e.level, e.grid) for e in entries)
        table: Dict[Tuple[str, str], Tuple[Fraction, str]] = {}
        for entry in entries:
            for gamma in generators:
                image = self.slash(entry, gamma, grid=grid)
                match = self.identify(image, entries)
                if match is None:
                    raise PrecisionError(f"{entry.name}|{gamma} is not a multiple of a family member")
                table[(entry.name, str(gamma))] = match
        return table


def _proportionality(image: FourierExpansion, target: FourierExpansion) -> Optional[Fraction]:
    if image.is_zero or target.is_zero:
        return None
    trunc = min(image.trunc, target.trunc)
    if image.lead != target.lead or image.lead >= trunc:
        return None
    c = image.coeffs[image.lead] / QuadScalar.coerce(target.coeffs[target.lead]) \
        if isinstance(image.coeffs[image.lead], QuadScalar) or isinstance(target.coeffs[target.lead], QuadScalar) \
        else Fraction(image.coeffs[image.lead]) / Fraction(target.coeffs[target.lead])
    scaled = target.scale(c)
    return clean(c) if image.agrees_with(scaled, Fraction(trunc, image.grid)) else None


def _same_image(a: OrbitImage, b: OrbitImage) -> bool:
    if a.expansion is not None and b.expansion is not None:
        return a.expansion == b.expansion
    if a.image is not None and b.image is not None:
        return a.image == b.image
    return False


# ---------------------------------------------------------------------------
# Module-level operations
# ---------------------------------------------------------------------------


def slash(entry, gamma: GroupElement, k: Optional[int] = None, grid: Optional[int] = None,
          terms: Optional[int] = None, catalog: Optional[Catalog] = None,
          config: Optional[Config] = None) -> FourierExpansion:
    return SlashEngine(catalog, config).slash(entry, gamma, k, grid, terms)


def atkin_lehner(entry, Q: int, N: Optional[int] = None, k: Optional[int] = None,
                 catalog: Optional[Catalog] = None, config: Optional[Config] = None) -> FourierExpansion:
    """W_Q f = f|_k (1/sqrt Q) (Qx, y; Nz, Qw)."""

    engine = SlashEngine(catalog, config)
    entry = engine.catalog.get(entry) if isinstance(entry, str) else entry
    N = entry.level if N is None else N
    k = entry.weight if k is None else k
    if k % 2:
        raise DomainError("Atkin-Lehner operators are implemented for even weight only")
    matrix = atkin_lehner_matrix(Q, N)
    logger.debug("W_%d for level %d uses %s", Q, N, matrix)
    return engine.slash(entry, matrix, k, grid=max(entry.level, entry.grid))


def coset_orbit(entry, group: Optional[CongruenceSubgroup] = None, catalog: Optional[Catalog] = None,
                config: Optional[Config] = None) -> List[OrbitImage]:
    return SlashEngine(catalog, config).coset_orbit(entry, group)


def action_table(names: Sequence[str], generators: Sequence[GroupElement],
                 catalog: Optional[Catalog] = None, config: Optional[Config] = None):
    return SlashEngine(catalog, config).action_table(names, generators)
