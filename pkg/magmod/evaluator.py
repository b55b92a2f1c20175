"""Arbitrary-precision evaluation of catalog objects on the upper half-plane."""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import mpmath

from .catalog import Catalog, CatalogEntry, FormExpr, default_catalog, load_catalog, parse_expr
from .groups import GroupElement, reduce_to_fundamental_domain
from .qseries import FourierExpansion
from .scalars import DomainError, PoleProximityError, TruncationError, to_mpc

logger = logging.getLogger(__name__)

REDUCTION_HEIGHT = mpmath.mpf(1) / 2


@dataclass
class EvalContext:
    """Numeric settings shared by every evaluation."""

    precision: int = 256
    tail_bound_target: Optional[mpmath.mpf] = None
    fundamental_domain_reduction: bool = True
    workers: int = 1
    guard_bits: int = 16

    def __post_init__(self) -> None:
        if self.precision < 64:
            raise DomainError("precision must be at least 64 bits")
        limit = mpmath.mpf(2) ** (-(self.precision // 2))
        if self.tail_bound_target is None:
            self.tail_bound_target = limit * mpmath.mpf(2) ** (-self.guard_bits)
        elif self.tail_bound_target >= limit:
            raise DomainError("tail bound target must lie below 2^(-precision/2)")

    @property
    def pole_guard(self) -> mpmath.mpf:
        """Smallest value-to-error-scale ratio a node may have before it is inverted."""

        return mpmath.mpf(2) ** (-(self.precision // 3))


def _upper(tau) -> mpmath.mpc:
    tau = mpmath.mpc(tau)
    if tau.imag <= 0:
        raise DomainError(f"tau = {mpmath.nstr(tau, 10)} is not in the upper half-plane")
    return tau


# ---------------------------------------------------------------------------
# Eta and its multiplier system
# ---------------------------------------------------------------------------


@lru_cache(maxsize=4096)
def dedekind_sum(h: int, k: int) -> Fraction:
    """s(h, k) = sum_{r=1}^{k-1} (r/k) ((h r / k))."""

    if k <= 0:
        raise DomainError("Dedekind sums need k > 0")
    total = Fraction(0)
    for r in range(1, k):
        x = Fraction(h * r, k)
        if x.denominator != 1:
            total += Fraction(r, k) * (x - (x.numerator // x.denominator) - Fraction(1, 2))
    return total


def eta_multiplier_exponent(gamma: GroupElement) -> Fraction:
    """e with eta(gamma tau) = exp(pi i e) (-i(c tau + d))^(1/2) eta(tau), c > 0."""

    a, b, c, d = (int(x) for x in gamma.entries())
    if c <= 0:
        raise DomainError("the multiplier formula needs c > 0")
    return Fraction(a + d, 12 * c) - dedekind_sum(d, c)


def _positive_bottom(gamma: GroupElement) -> GroupElement:
    if gamma.c < 0 or (gamma.c == 0 and gamma.d < 0):
        return -gamma
    return gamma


def _eta_direct(tau: mpmath.mpc) -> mpmath.mpc:
    q = mpmath.exp(2j * mpmath.pi * tau)
    return mpmath.exp(1j * mpmath.pi * tau / 12) * mpmath.qp(q)


def eval_eta(tau, ctx: Optional[EvalContext] = None) -> mpmath.mpc:
    """eta(tau) via the q-product, after SL2(Z) reduction when Im tau < 1/2."""

    ctx = ctx or EvalContext()
    with mpmath.workprec(ctx.precision + ctx.guard_bits):
        tau = _upper(tau)
        if not ctx.fundamental_domain_reduction or tau.imag >= REDUCTION_HEIGHT:
            return _eta_direct(tau)
        reduced, gamma = reduce_to_fundamental_domain(tau)
        gamma = _positive_bottom(gamma)
        value = _eta_direct(reduced)
        if gamma.c == 0:
            return value * mpmath.exp(-1j * mpmath.pi * int(gamma.b) / 12)
        exponent = eta_multiplier_exponent(gamma)
        epsilon = mpmath.expjpi(mpmath.mpf(exponent.numerator) / exponent.denominator)
        return value / (epsilon * mpmath.sqrt(-1j * gamma.automorphy(tau)))


# ---------------------------------------------------------------------------
# Eisenstein series
# ---------------------------------------------------------------------------

_EISENSTEIN_FACTOR = {2: -24, 4: 240, 6: -504}


def _eisenstein_direct(k: int, tau: mpmath.mpc) -> mpmath.mpc:
    q = mpmath.exp(2j * mpmath.pi * tau)
    eps = mpmath.eps * 4
    total = mpmath.mpc(0)
    power = q
    n = 1
    while True:
        term = mpmath.mpf(n) ** (k - 1) * power / (1 - power)
        total += term
        if abs(term) < eps * (1 + abs(total)) and n > 2:
            break
        n += 1
        power *= q
    return 1 + _EISENSTEIN_FACTOR[k] * total


def eval_eisenstein(k: int, tau, ctx: Optional[EvalContext] = None) -> mpmath.mpc:
    """E_k(tau) for k in 2, 4, 6; E2 transforms quasi-modularly under reduction."""

    return eisenstein_with_scale(k, tau, ctx)[0]


def eisenstein_with_scale(k: int, tau, ctx: Optional[EvalContext] = None) -> Tuple[mpmath.mpc, mpmath.mpf]:
    """E_k(tau) and the size its rounding error is measured against.

    The series is summed at the reduced point, where E_k is O(1); the scale
    carries the automorphy factor back to tau.
    """

    if k not in _EISENSTEIN_FACTOR:
        raise DomainError(f"E_{k} is not supported")
    ctx = ctx or EvalContext()
    with mpmath.workprec(ctx.precision + ctx.guard_bits):
        tau = _upper(tau)
        if not ctx.fundamental_domain_reduction or tau.imag >= REDUCTION_HEIGHT:
            return _eisenstein_direct(k, tau), mpmath.mpf(1)
        reduced, gamma = reduce_to_fundamental_domain(tau)
        j = gamma.automorphy(tau)
        value = _eisenstein_direct(k, reduced)
        if k == 2:
            # E2(g tau) = (c tau + d)^2 E2(tau) - (6i/pi) c (c tau + d)
            c = mpmath.mpf(int(gamma.c))
            shift = 6j / mpmath.pi * c * j
            return (value + shift) / j**2, (1 + abs(shift)) / abs(j) ** 2
        return value / j**k, 1 / abs(j) ** k


def eval_theta(kind: str, tau, ctx: Optional[EvalContext] = None) -> mpmath.mpc:
    """Jacobi theta constants in q = e^(2 pi i tau): theta3 = sum q^(n^2/2)."""

    ctx = ctx or EvalContext()
    with mpmath.workprec(ctx.precision + ctx.guard_bits):
        tau = _upper(tau)
        eta1 = eval_eta(tau, ctx)
        if kind == "theta2":
            return 2 * eval_eta(2 * tau, ctx) ** 2 / eta1
        half = eval_eta(tau / 2, ctx)
        if kind == "theta3":
            return eta1**5 / (half**2 * eval_eta(2 * tau, ctx) ** 2)
        if kind == "theta4":
            return half**2 / eta1
    raise DomainError(f"unknown theta constant {kind!r}")


# ---------------------------------------------------------------------------
# Expression trees
# ---------------------------------------------------------------------------


_ZERO = FormExpr("const", (Fraction(0),))


def _const(value) -> FormExpr:
    return FormExpr("const", (Fraction(value),))


def _product(*factors: FormExpr) -> FormExpr:
    if any(f == _ZERO for f in factors):
        return _ZERO
    kept = tuple(f for f in factors if f != _const(1))
    if not kept:
        return _const(1)
    return kept[0] if len(kept) == 1 else FormExpr("mul", kept)


def _total(*terms: FormExpr) -> FormExpr:
    kept = tuple(t for t in terms if t != _ZERO)
    if not kept:
        return _ZERO
    return kept[0] if len(kept) == 1 else FormExpr("add", kept)


def _leaf(op: str, m: int) -> FormExpr:
    return FormExpr(op, (m,))


class Evaluator:
    """Evaluate catalog expression trees at points of the upper half-plane.

    Every node carries its value together with an error scale: the rounding
    error of the node is about eps times the scale. Inverting a node whose
    value is not well above its scale means tau sits on (or next to) a zero
    of that node, which is reported as PoleProximityError.
    """

    def __init__(self, catalog: Optional[Catalog] = None, ctx: Optional[EvalContext] = None) -> None:
        self.catalog = catalog or default_catalog()
        self.ctx = ctx or EvalContext()
        self._derivatives: Dict[FormExpr, FormExpr] = {}

    def eval_entry(self, entry: Union[str, CatalogEntry], tau) -> mpmath.mpc:
        entry = self.catalog.get(entry) if isinstance(entry, str) else entry
        try:
            return self.eval_expr(entry.expr, tau)
        except PoleProximityError as exc:
            if exc.pole is None:
                exc.pole = self._nearest_pole(entry, tau)
            raise

    def eval_expr(self, expr: Union[str, FormExpr], tau) -> mpmath.mpc:
        if isinstance(expr, str):
            expr = parse_expr(expr)
        with mpmath.workprec(self.ctx.precision + self.ctx.guard_bits):
            return self._eval(expr, _upper(tau), {})[0]

    def _eval(self, expr: FormExpr, tau: mpmath.mpc, memo: Dict) -> Tuple[mpmath.mpc, mpmath.mpf]:
        if expr in memo:
            return memo[expr]
        result = self._eval_node(expr, tau, memo)
        memo[expr] = result
        return result

    def _eval_node(self, expr: FormExpr, tau: mpmath.mpc, memo: Dict) -> Tuple[mpmath.mpc, mpmath.mpf]:
        op, args = expr.op, expr.args
        ctx = self.ctx
        if op == "eta":
            value = eval_eta(args[0] * tau, ctx)
            return value, abs(value)
        if op in ("E2", "E4", "E6"):
            return eisenstein_with_scale(int(op[1]), args[0] * tau, ctx)
        if op in ("theta2", "theta3", "theta4"):
            value = eval_theta(op, args[0] * tau, ctx)
            return value, abs(value)
        if op == "const":
            return to_mpc(args[0]), mpmath.mpf(0)
        if op == "q":
            e = Fraction(args[0])
            value = mpmath.exp(2j * mpmath.pi * tau * e.numerator / e.denominator)
            return value, abs(value)
        if op == "ref":
            return self._eval(self.catalog.get(args[0]).expr, tau, memo)
        if op in ("add", "sub"):
            parts = [self._eval(a, tau, memo) for a in args]
            if op == "sub":
                parts[1] = (-parts[1][0], parts[1][1])
            return mpmath.fsum(v for v, _ in parts), mpmath.fsum(s for _, s in parts)
        if op == "mul":
            parts = [self._eval(a, tau, memo) for a in args]
            sizes = [abs(v) for v, _ in parts]
            scale = mpmath.fsum(
                s * mpmath.fprod(sizes[:i] + sizes[i + 1:]) for i, (_, s) in enumerate(parts)
            )
            return mpmath.fprod(v for v, _ in parts), scale
        if op == "inv":
            value, scale = self._eval(args[0], tau, memo)
            self._guard(value, scale, tau)
            return 1 / value, scale / abs(value) ** 2
        if op == "pow":
            value, scale = self._eval(args[0], tau, memo)
            n = args[1]
            if n == 0:
                return mpmath.mpc(1), mpmath.mpf(0)
            if n < 0:
                self._guard(value, scale, tau)
            return value**n, abs(n) * abs(value) ** (n - 1) * scale
        if op == "rescale":
            return self._eval(args[0], args[1] * tau, {})
        if op == "diff":
            return self._eval(self.derivative(args[0]), tau, memo)
        if op == "hecke":
            source = self.catalog.get(args[0])
            return self._hecke(source.expr, args[1], source.weight, 0, tau)
        if op == "dhecke":
            return self._hecke(*args, tau)
        raise DomainError(f"unknown node {op!r}")

    def _hecke(self, source: FormExpr, n: int, k: int, order: int,
               tau: mpmath.mpc) -> Tuple[mpmath.mpc, mpmath.mpf]:
        # n^(k-1) sum_{ad = n, 0 <= b < d} d^(-k) (a/d)^order (D^order f)((a tau + b)/d)
        total, scale = mpmath.mpc(0), mpmath.mpf(0)
        for a in range(1, n + 1):
            if n % a:
                continue
            d = n // a
            weight = mpmath.mpf(d) ** (-k) * (mpmath.mpf(a) / d) ** order
            for b in range(d):
                value, error = self._eval(source, (a * tau + b) / d, {})
                total += weight * value
                scale += weight * error
        factor = mpmath.mpf(n) ** (k - 1)
        return factor * total, factor * scale

    # q d/dq ----------------------------------------------------------------
    def derivative(self, expr: FormExpr) -> FormExpr:
        """D = q d/dq of an expression tree, as another expression tree."""

        if expr not in self._derivatives:
            self._derivatives[expr] = self._derive(expr)
        return self._derivatives[expr]

    def _derive(self, expr: FormExpr) -> FormExpr:
        op, args = expr.op, expr.args
        if op == "const":
            return _ZERO
        if op == "q":
            return _product(_const(args[0]), expr)
        if op == "eta":
            m = args[0]
            return _product(_const(Fraction(m, 24)), expr, _leaf("E2", m))
        if op in ("E2", "E4", "E6"):
            m = args[0]
            e2, e4, e6 = _leaf("E2", m), _leaf("E4", m), _leaf("E6", m)
            if op == "E2":
                return _product(_const(Fraction(m, 12)), FormExpr("sub", (_product(e2, e2), e4)))
            if op == "E4":
                return _product(_const(Fraction(m, 3)), FormExpr("sub", (_product(e2, e4), e6)))
            return _product(_const(Fraction(m, 2)), FormExpr("sub", (_product(e2, e6), _product(e4, e4))))
        if op in ("theta2", "theta3", "theta4"):
            m = args[0]
            fourth = {kind: FormExpr("pow", (_leaf(kind, m), 4)) for kind in ("theta2", "theta3", "theta4")}
            e2 = _leaf("E2", m)
            if op == "theta2":
                log_derivative = _total(e2, fourth["theta3"], fourth["theta4"])
            elif op == "theta3":
                log_derivative = _total(e2, FormExpr("sub", (fourth["theta2"], fourth["theta4"])))
            else:
                log_derivative = FormExpr("sub", (e2, _total(fourth["theta2"], fourth["theta3"])))
            return _product(_const(Fraction(m, 24)), expr, log_derivative)
        if op == "ref":
            return self.derivative(self.catalog.get(args[0]).expr)
        if op == "add":
            return _total(*(self.derivative(a) for a in args))
        if op == "sub":
            return _total(self.derivative(args[0]), _product(_const(-1), self.derivative(args[1])))
        if op == "mul":
            return _total(*(
                _product(*args[:i], self.derivative(args[i]), *args[i + 1:]) for i in range(len(args))
            ))
        if op == "inv":
            return _product(_const(-1), self.derivative(args[0]), FormExpr("pow", (args[0], -2)))
        if op == "pow":
            base, n = args
            if n == 0:
                return _ZERO
            return _product(_const(n), FormExpr("pow", (base, n - 1)), self.derivative(base))
        if op == "rescale":
            inner, m = args
            return _product(_const(m), FormExpr("rescale", (self.derivative(inner), m)))
        if op == "diff":
            return self.derivative(self.derivative(args[0]))
        if op == "hecke":
            source = self.catalog.get(args[0])
            return FormExpr("dhecke", (self.derivative(source.expr), args[1], source.weight, 1))
        if op == "dhecke":
            inner, n, k, order = args
            return FormExpr("dhecke", (self.derivative(inner), n, k, order + 1))
        raise DomainError(f"unknown node {op!r}")

    def _guard(self, value: mpmath.mpc, scale: mpmath.mpf, tau: mpmath.mpc) -> None:
        if value == 0 or abs(value) < self.ctx.pole_guard * scale:
            raise PoleProximityError(f"tau = {mpmath.nstr(tau, 15)} is within the pole guard radius")

    def _nearest_pole(self, entry: CatalogEntry, tau) -> Optional[str]:
        if not entry.poles:
            return None
        here = entry.group.canonical_point(tau)
        best = min(entry.poles, key=lambda p: abs(entry.group.canonical_point(p.point()) - here))
        return best.describe()

    # batches ---------------------------------------------------------------
    def eval_many(self, entry: Union[str, CatalogEntry], taus: Sequence) -> List[mpmath.mpc]:
        entry = self.catalog.get(entry) if isinstance(entry, str) else entry
        if self.ctx.workers <= 1 or len(taus) < 2 * self.ctx.workers:
            return [self.eval_entry(entry, tau) for tau in taus]
        jobs = [
            (str(self.catalog.path) if self.catalog.path else None, entry.name, _encode(tau), self.ctx.precision)
            for tau in taus
        ]
        with ProcessPoolExecutor(max_workers=self.ctx.workers) as executor:
            results = list(executor.map(_eval_job, jobs, chunksize=max(1, len(jobs) // (4 * self.ctx.workers))))
        return [mpmath.mpc(re, im) for re, im in results]


def _encode(tau) -> tuple:
    tau = mpmath.mpc(tau)
    return (mpmath.nstr(tau.real, mpmath.mp.dps + 10), mpmath.nstr(tau.imag, mpmath.mp.dps + 10))


def _eval_job(job) -> tuple:
    path, name, (re, im), precision = job
    catalog = load_catalog(Path(path)) if path else default_catalog()
    with mpmath.workprec(precision + 16):
        value = Evaluator(catalog, EvalContext(precision=precision)).eval_entry(name, mpmath.mpc(re, im))
        digits = int(precision * 0.302) + 10
        return mpmath.nstr(value.real, digits), mpmath.nstr(value.imag, digits)


def eval_entry(entry: Union[str, CatalogEntry], tau, ctx: Optional[EvalContext] = None,
               catalog: Optional[Catalog] = None) -> mpmath.mpc:
    return Evaluator(catalog, ctx).eval_entry(entry, tau)


# ---------------------------------------------------------------------------
# Truncated sums
# ---------------------------------------------------------------------------


def eval_expansion(f: FourierExpansion, tau, ctx: Optional[EvalContext] = None) -> mpmath.mpc:
    """Partial sum of an expansion with a geometric estimate of the tail."""

    ctx = ctx or EvalContext()
    with mpmath.workprec(ctx.precision + ctx.guard_bits):
        tau = _upper(tau)
        x = mpmath.exp(2j * mpmath.pi * tau / f.grid)
        r = abs(x)
        growth = mpmath.mpf(1)
        tail_terms = [(n, v) for n, v in f.items() if n > 0][-8:]
        for n, v in tail_terms:
            growth = max(growth, abs(to_mpc(v)) ** (mpmath.mpf(1) / n))
        ratio = growth * r
        if ratio >= 1:
            raise TruncationError(f"expansion does not converge visibly at Im tau = {mpmath.nstr(tau.imag, 5)}")
        tail = ratio**f.trunc / (1 - ratio)
        if tail > ctx.tail_bound_target:
            raise TruncationError(
                f"truncation {f.trunc} leaves a tail of about {mpmath.nstr(tail, 5)} at Im tau = {mpmath.nstr(tau.imag, 5)}"
            )
        return mpmath.fsum(to_mpc(v) * x**n for n, v in f.items())
