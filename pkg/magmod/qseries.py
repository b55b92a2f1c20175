"""Truncated Fourier expansions with exact coefficients.

A :class:`FourierExpansion` is ``sum a_n q^(n/M)`` known for ``n < trunc``.
Everything at or beyond ``trunc`` is unknown, never zero.  Arithmetic
propagates truncation pessimistically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterator, List, Mapping, Optional, Tuple, Union

from .scalars import (
    DomainError,
    QuadScalar,
    Scalar,
    TruncationError,
    clean,
    format_scalar,
    parse_scalar,
    reciprocal,
)

_SCALAR_TYPES = (int, Fraction, QuadScalar)


@dataclass(frozen=True)
class FourierExpansion:
    grid: int
    coeffs: Mapping[int, Scalar] = field(default_factory=dict)
    trunc: int = 0

    def __post_init__(self) -> None:
        if self.grid < 1:
            raise DomainError("grid must be a positive integer")
        stored = {}
        for index, value in self.coeffs.items():
            value = clean(value)
            if value == 0:
                continue
            if index >= self.trunc:
                raise TruncationError(f"coefficient at {index} lies beyond truncation {self.trunc}")
            stored[int(index)] = value
        object.__setattr__(self, "coeffs", stored)

    # ------------------------------------------------------------------
    # construction
    # ------------------------------------------------------------------
    @classmethod
    def zero(cls, grid: int, trunc: int) -> "FourierExpansion":
        return cls(grid, {}, trunc)

    @classmethod
    def constant(cls, value: Scalar, grid: int, trunc: int) -> "FourierExpansion":
        return cls.monomial(0, grid, trunc, value)

    @classmethod
    def monomial(cls, index: int, grid: int, trunc: int, value: Scalar = 1) -> "FourierExpansion":
        return cls(grid, {index: value} if index < trunc else {}, trunc)

    @classmethod
    def from_list(cls, values, grid: int = 1, lead: int = 0) -> "FourierExpansion":
        values = list(values)
        return cls(grid, {lead + i: v for i, v in enumerate(values)}, lead + len(values))

    # ------------------------------------------------------------------
    # inspection
    # ------------------------------------------------------------------
    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def lead(self) -> Optional[int]:
        return min(self.coeffs) if self.coeffs else None

    @property
    def order_bound(self) -> Fraction:
        """Exponent up to which (exclusive) the expansion is known."""

        return Fraction(self.trunc, self.grid)

    def coefficient(self, n: int) -> Scalar:
        if n >= self.trunc:
            raise TruncationError(f"index {n} is beyond truncation {self.trunc} (grid {self.grid})")
        return self.coeffs.get(n, 0)

    def coefficient_at(self, exponent: Union[int, Fraction]) -> Scalar:
        scaled = Fraction(exponent) * self.grid
        if scaled >= self.trunc:
            raise TruncationError(f"exponent {exponent} is beyond {self.order_bound}")
        if scaled.denominator != 1:
            return 0
        return self.coeffs.get(scaled.numerator, 0)

    def items(self) -> Iterator[Tuple[int, Scalar]]:
        return iter(sorted(self.coeffs.items()))

    def coefficient_list(self, start: int, stop: int) -> List[Scalar]:
        return [self.coefficient(n) for n in range(start, stop)]

    # ------------------------------------------------------------------
    # grids and truncation
    # ------------------------------------------------------------------
    def regrid(self, grid: int) -> "FourierExpansion":
        if grid % self.grid:
            raise DomainError(f"grid {grid} is not a multiple of {self.grid}")
        factor = grid // self.grid
        if factor == 1:
            return self
        return FourierExpansion(
            grid, {n * factor: v for n, v in self.coeffs.items()}, self.trunc * factor
        )

    def normalized(self) -> "FourierExpansion":
        """Same function on the coarsest grid that carries it."""

        step = self.grid
        for n in self.coeffs:
            step = math.gcd(step, n)
        if step <= 1:
            return self
        return FourierExpansion(
            self.grid // step,
            {n // step: v for n, v in self.coeffs.items()},
            -(-self.trunc // step),
        )

    def truncate(self, trunc: int) -> "FourierExpansion":
        if trunc > self.trunc:
            raise TruncationError(f"cannot extend truncation {self.trunc} to {trunc}")
        return FourierExpansion(self.grid, {n: v for n, v in self.coeffs.items() if n < trunc}, trunc)

    def truncate_exponent(self, bound: Union[int, Fraction]) -> "FourierExpansion":
        """Keep exponents strictly below ``bound``."""

        return self.truncate(math.ceil(Fraction(bound) * self.grid))

    # ------------------------------------------------------------------
    # ring operations
    # ------------------------------------------------------------------
    def __neg__(self) -> "FourierExpansion":
        return FourierExpansion(self.grid, {n: -v for n, v in self.coeffs.items()}, self.trunc)

    def __add__(self, other) -> "FourierExpansion":
        if isinstance(other, _SCALAR_TYPES):
            other = FourierExpansion.constant(other, self.grid, self.trunc)
        if not isinstance(other, FourierExpansion):
            return NotImplemented
        f, g = unify(self, other)
        trunc = min(f.trunc, g.trunc)
        out: Dict[int, Scalar] = {n: v for n, v in f.coeffs.items() if n < trunc}
        for n, v in g.coeffs.items():
            if n < trunc:
                out[n] = out.get(n, 0) + v
        return FourierExpansion(f.grid, out, trunc)

    __radd__ = __add__

    def __sub__(self, other) -> "FourierExpansion":
        return self + (-other)

    def __rsub__(self, other) -> "FourierExpansion":
        return (-self) + other

    def scale(self, factor: Scalar) -> "FourierExpansion":
        return FourierExpansion(self.grid, {n: v * factor for n, v in self.coeffs.items()}, self.trunc)

    def __mul__(self, other) -> "FourierExpansion":
        if isinstance(other, _SCALAR_TYPES):
            return self.scale(other)
        if not isinstance(other, FourierExpansion):
            return NotImplemented
        f, g = unify(self, other)
        lead_f = f.trunc if f.is_zero else f.lead
        lead_g = g.trunc if g.is_zero else g.lead
        trunc = min(f.trunc + lead_g, g.trunc + lead_f)
        right = sorted(g.coeffs.items())
        out: Dict[int, Scalar] = {}
        for i, a in f.coeffs.items():
            limit = trunc - i
            for j, b in right:
                if j >= limit:
                    break
                out[i + j] = out.get(i + j, 0) + a * b
        return FourierExpansion(f.grid, out, trunc)

    __rmul__ = __mul__

    def invert(self) -> "FourierExpansion":
        """Multiplicative inverse; relative precision ``trunc - lead`` is kept."""

        if self.is_zero:
            raise DomainError("cannot invert the zero expansion")
        lead = self.lead
        head = reciprocal(self.coeffs[lead])
        step = 0
        for n in self.coeffs:
            step = math.gcd(step, n - lead)
        relative = self.trunc - lead
        tail = sorted((n - lead, v) for n, v in self.coeffs.items() if n != lead)
        inverse: Dict[int, Scalar] = {0: head}
        if step:
            for m in range(step, relative, step):
                acc = 0
                for i, c in tail:
                    if i > m:
                        break
                    b = inverse.get(m - i)
                    if b is not None:
                        acc = acc + c * b
                if acc != 0:
                    inverse[m] = clean(-head * acc)
        return FourierExpansion(
            self.grid, {m - lead: v for m, v in inverse.items()}, relative - lead
        )

    def __truediv__(self, other) -> "FourierExpansion":
        if isinstance(other, _SCALAR_TYPES):
            return self.scale(reciprocal(other))
        if not isinstance(other, FourierExpansion):
            return NotImplemented
        return self * other.invert()

    def __rtruediv__(self, other) -> "FourierExpansion":
        return self.invert() * other

    def __pow__(self, exponent: int) -> "FourierExpansion":
        if not isinstance(exponent, int):
            return NotImplemented
        if exponent < 0:
            return self.invert() ** (-exponent)
        result = FourierExpansion.constant(1, self.grid, _unit_trunc(self))
        base = self
        while exponent:
            if exponent & 1:
                result = result * base
            exponent >>= 1
            if exponent:
                base = base * base
        return result

    # ------------------------------------------------------------------
    # operators on the variable
    # ------------------------------------------------------------------
    def differentiate(self) -> "FourierExpansion":
        """The operator D = q d/dq: a_n q^(n/M) -> (n/M) a_n q^(n/M)."""

        return FourierExpansion(
            self.grid,
            {n: v * Fraction(n, self.grid) for n, v in self.coeffs.items()},
            self.trunc,
        )

    def rescale(self, m: int) -> "FourierExpansion":
        """tau -> m*tau."""

        if m < 1:
            raise DomainError("rescale factor must be a positive integer")
        return FourierExpansion(self.grid, {n * m: v for n, v in self.coeffs.items()}, self.trunc * m)

    # ------------------------------------------------------------------
    # comparison and serialization
    # ------------------------------------------------------------------
    def agrees_with(self, other: "FourierExpansion", below: Optional[Union[int, Fraction]] = None) -> bool:
        """Coefficientwise equality on the common known range (optionally capped)."""

        f, g = unify(self, other)
        trunc = min(f.trunc, g.trunc)
        if below is not None:
            trunc = min(trunc, math.ceil(Fraction(below) * f.grid))
        return all(f.coeffs.get(n, 0) == g.coeffs.get(n, 0) for n in set(f.coeffs) | set(g.coeffs) if n < trunc)

    def to_text(self) -> str:
        terms = []
        for n, value in self.items():
            terms.append(_format_term(value, Fraction(n, self.grid)))
        terms.append(f"O({_format_power(Fraction(self.trunc, self.grid))})")
        text = " + ".join(terms)
        return text.replace("+ -", "- ")

    def to_json(self) -> dict:
        return {
            "grid": self.grid,
            "lead": self.lead,
            "trunc": self.trunc,
            "coeffs": [[n, format_scalar(v)] for n, v in self.items()],
        }

    @classmethod
    def from_json(cls, payload: Mapping) -> "FourierExpansion":
        return cls(
            int(payload["grid"]),
            {int(n): parse_scalar(v) for n, v in payload["coeffs"]},
            int(payload["trunc"]),
        )

    def __str__(self) -> str:
        return self.to_text()


def unify(f: FourierExpansion, g: FourierExpansion) -> Tuple[FourierExpansion, FourierExpansion]:
    """Bring two expansions onto the lcm of their grids."""

    grid = f.grid * g.grid // math.gcd(f.grid, g.grid)
    return f.regrid(grid), g.regrid(grid)


def bol_image(g: FourierExpansion, k: int) -> FourierExpansion:
    """D^(k-1) g for a weight 2-k expansion g."""

    if k < 2:
        raise DomainError("Bol's identity needs k >= 2")
    result = g
    for _ in range(k - 1):
        result = result.differentiate()
    return result


def _unit_trunc(f: FourierExpansion) -> int:
    # relative precision of f, which is also the precision of f**0 = 1
    if f.is_zero:
        return f.trunc
    return f.trunc - f.lead


def _format_power(exponent: Fraction) -> str:
    if exponent == 0:
        return "1"
    if exponent == 1:
        return "q"
    if exponent.denominator == 1:
        return f"q^{exponent.numerator}"
    return f"q^({exponent})"


def _format_term(value: Scalar, exponent: Fraction) -> str:
    power = _format_power(exponent)
    if isinstance(value, QuadScalar):
        coefficient = f"({format_scalar(value)})"
    else:
        coefficient = str(Fraction(value))
    if exponent == 0:
        return coefficient
    if value == 1:
        return power
    if value == -1:
        return f"-{power}"
    return f"{coefficient}*{power}"
