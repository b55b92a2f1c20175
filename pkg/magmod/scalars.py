"""Exact scalars over Q and quadratic fields, and their recognition from floats.

Rationals are plain :class:`fractions.Fraction` values (or ``int`` when the
denominator is one).  Elements of a quadratic field Q(sqrt d) are
:class:`QuadScalar` instances.  The numeric side uses :mod:`mpmath`; every
value coming out of an integral or a contour sum is an ``mpmath.mpc``.
"""
from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Optional, Sequence, Union

import mpmath
from sympy import factorint, isprime, multiplicity

logger = logging.getLogger(__name__)

BigComplex = mpmath.mpc
MIN_PRECISION = 64
DEFAULT_MAX_DENOMINATOR = 10**6


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------


class MagmodError(RuntimeError):
    """Base class for all errors raised by magmod computations."""


class DomainError(MagmodError, ValueError):
    """Raised when an input lies outside the mathematical domain of an operation."""


class TruncationError(MagmodError, IndexError):
    """Raised when a coefficient beyond the known truncation is requested."""


class PrecisionError(MagmodError):
    """Raised when a numeric stage cannot certify its result."""

    def __init__(self, message: str, index: Optional[int] = None) -> None:
        super().__init__(message)
        self.index = index


class PoleProximityError(PrecisionError):
    """Raised when a point is too close to a pole to be evaluated."""

    def __init__(self, message: str, pole: object = None) -> None:
        super().__init__(message)
        self.pole = pole


class ConvergenceError(PrecisionError):
    """Raised when an iterative numeric method does not converge."""

    def __init__(self, message: str, diagnostics: Optional[dict] = None) -> None:
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class PathError(MagmodError):
    """Raised when an integration path is not admissible."""


class ResourceError(MagmodError):
    """Raised when a request exceeds the configured compute budget."""


# ---------------------------------------------------------------------------
# Rationals
# ---------------------------------------------------------------------------


def clean(value):
    """Return ``value`` in its simplest exact type (int before Fraction)."""

    if isinstance(value, Fraction) and value.denominator == 1:
        return value.numerator
    if isinstance(value, QuadScalar) and value.b == 0:
        return clean(value.a)
    return value


def reduce_rational(numerator: int, denominator: int) -> Fraction:
    """Return ``numerator/denominator`` in lowest terms with positive denominator."""

    if denominator == 0:
        raise DomainError("zero denominator")
    return Fraction(numerator, denominator)


def as_rational(value: Union[int, str, Fraction]) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        return Fraction(value.replace("−", "-").strip())
    return Fraction(value)


def padic_valuation(x: Union[int, Fraction], p: int) -> Union[int, float]:
    """Return v_p(x); ``math.inf`` for x = 0."""

    if not isprime(p):
        raise DomainError(f"{p} is not prime")
    x = Fraction(x)
    if x == 0:
        return math.inf
    return multiplicity(p, abs(x.numerator)) - multiplicity(p, x.denominator)


def squarefree_part(n: int) -> int:
    """Squarefree integer in the same square class as ``n`` (sign kept)."""

    if n == 0:
        raise DomainError("0 has no squarefree part")
    result = -1 if n < 0 else 1
    for prime, exponent in factorint(abs(n)).items():
        if exponent % 2:
            result *= prime
    return result


# ---------------------------------------------------------------------------
# Quadratic fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadScalar:
    """The number ``a + b*sqrt(d)`` with rational a, b and squarefree d.

    Rational values are stored with ``b == 0`` and ``d == 1`` so that equal
    numbers have equal representations.
    """

    a: Fraction
    b: Fraction = Fraction(0)
    d: int = 1

    def __post_init__(self) -> None:
        a, b, d = Fraction(self.a), Fraction(self.b), int(self.d)
        if d == 0:
            raise DomainError("radicand must be nonzero")
        if b == 0:
            d = 1
        else:
            core = squarefree_part(d)
            if core != d:
                # sqrt(m^2 * core) = m * sqrt(core)
                b *= Fraction(math.isqrt(d // core))
                d = core
            if d == 1:
                a, b = a + b, Fraction(0)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "d", d)

    # construction helpers -------------------------------------------------
    @classmethod
    def sqrt(cls, d: int, scale: Union[int, Fraction] = 1) -> "QuadScalar":
        return cls(Fraction(0), Fraction(scale), d)

    @classmethod
    def coerce(cls, value) -> "QuadScalar":
        if isinstance(value, QuadScalar):
            return value
        return cls(Fraction(value))

    def _field(self, other: "QuadScalar") -> int:
        if self.b == 0:
            return other.d
        if other.b == 0 or other.d == self.d:
            return self.d
        raise DomainError(
            f"mixing Q(sqrt {self.d}) and Q(sqrt {other.d}) needs a biquadratic field"
        )

    # arithmetic ------------------------------------------------------------
    def __add__(self, other):
        try:
            other = QuadScalar.coerce(other)
        except (TypeError, ValueError):
            return NotImplemented
        d = self._field(other)
        return clean(QuadScalar(self.a + other.a, self.b + other.b, d))

    __radd__ = __add__

    def __neg__(self):
        return QuadScalar(-self.a, -self.b, self.d)

    def __sub__(self, other):
        try:
            other = QuadScalar.coerce(other)
        except (TypeError, ValueError):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        try:
            other = QuadScalar.coerce(other)
        except (TypeError, ValueError):
            return NotImplemented
        d = self._field(other)
        a = self.a * other.a + self.b * other.b * d
        b = self.a * other.b + self.b * other.a
        return clean(QuadScalar(a, b, d))

    __rmul__ = __mul__

    def conjugate(self) -> "QuadScalar":
        return QuadScalar(self.a, -self.b, self.d)

    def norm(self) -> Fraction:
        return self.a * self.a - self.b * self.b * self.d

    def reciprocal(self):
        n = self.norm()
        if n == 0:
            raise DomainError("division by zero")
        conj = self.conjugate()
        return clean(QuadScalar(conj.a / n, conj.b / n, self.d))

    def __truediv__(self, other):
        try:
            other = QuadScalar.coerce(other)
        except (TypeError, ValueError):
            return NotImplemented
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return QuadScalar.coerce(other) * self.reciprocal()

    def __eq__(self, other) -> bool:
        try:
            other = QuadScalar.coerce(other)
        except (TypeError, ValueError):
            return NotImplemented
        return (self.a, self.b, self.d) == (other.a, other.b, other.d)

    def __hash__(self) -> int:
        if self.b == 0:
            return hash(self.a)
        return hash((self.a, self.b, self.d))

    def __bool__(self) -> bool:
        return self.a != 0 or self.b != 0

    def to_mpc(self) -> mpmath.mpc:
        root = mpmath.sqrt(self.d)
        return mpmath.mpc(_to_mpf(self.a)) + _to_mpf(self.b) * root

    def __str__(self) -> str:
        return format_scalar(self)


Scalar = Union[int, Fraction, QuadScalar]


def _to_mpf(value: Fraction) -> mpmath.mpf:
    value = Fraction(value)
    return mpmath.mpf(value.numerator) / value.denominator


def to_mpc(value: Scalar) -> mpmath.mpc:
    """Embed an exact scalar into the current mpmath context."""

    if isinstance(value, QuadScalar):
        return value.to_mpc()
    return mpmath.mpc(_to_mpf(Fraction(value)))


def reciprocal(value: Scalar) -> Scalar:
    if isinstance(value, QuadScalar):
        return value.reciprocal()
    if value == 0:
        raise DomainError("division by zero")
    if isinstance(value, int) and value in (1, -1):
        return value
    return clean(1 / Fraction(value))


# ---------------------------------------------------------------------------
# Text form
# ---------------------------------------------------------------------------

_QUAD_PATTERN = re.compile(
    r"^\((?P<a>[^()]+)\)\+\((?P<b>[^()]+)\)√(?P<d>-?\d+)$"
)


def format_scalar(value: Scalar) -> str:
    """Serialize as ``"-3/2"`` or ``"(1/4)+(-1/8)√-3"``."""

    value = clean(value)
    if isinstance(value, QuadScalar):
        return f"({value.a})+({value.b})√{value.d}"
    return str(Fraction(value))


def parse_scalar(text: str) -> Scalar:
    text = text.replace("−", "-").replace(" ", "")
    match = _QUAD_PATTERN.match(text)
    if match:
        return clean(
            QuadScalar(
                Fraction(match.group("a")),
                Fraction(match.group("b")),
                int(match.group("d")),
            )
        )
    try:
        return clean(Fraction(text))
    except ValueError as exc:
        raise DomainError(f"cannot parse scalar {text!r}") from exc


# ---------------------------------------------------------------------------
# Recognition of exact values from floating approximations
# ---------------------------------------------------------------------------


def working_precision(bits: int):
    """Context manager for mpmath working precision, at least 64 bits."""

    if bits < MIN_PRECISION:
        raise DomainError(f"precision must be at least {MIN_PRECISION} bits, got {bits}")
    return mpmath.workprec(bits)


def default_tolerance() -> mpmath.mpf:
    return mpmath.mpf(2) ** (-(mpmath.mp.prec // 2))


def rational_reconstruct(
    x,
    max_denominator: int = DEFAULT_MAX_DENOMINATOR,
    tol=None,
) -> Optional[Fraction]:
    """Recognize ``x`` as p/q with q <= max_denominator, or return ``None``.

    The candidates are the continued-fraction convergents of Re(x).
    """

    tol = default_tolerance() if tol is None else mpmath.mpf(tol)
    x = mpmath.mpc(x)
    if abs(x.imag) >= tol:
        return None
    value = x.real
    rest = value
    p_prev, p_cur = 0, 1
    q_prev, q_cur = 1, 0
    for _ in range(4 * mpmath.mp.prec):
        head = int(mpmath.floor(rest))
        p_prev, p_cur = p_cur, head * p_cur + p_prev
        q_prev, q_cur = q_cur, head * q_cur + q_prev
        if q_cur > max_denominator:
            return None
        candidate = Fraction(p_cur, q_cur)
        if abs(value - _to_mpf(candidate)) < tol:
            return candidate
        remainder = rest - head
        if remainder == 0:
            return None
        rest = 1 / remainder
    return None


def quad_reconstruct(
    x,
    d: int,
    scale,
    max_denominator: int = DEFAULT_MAX_DENOMINATOR,
    tol=None,
) -> Optional[Scalar]:
    """Find rational q with ``x ~ scale * q * sqrt(d)`` (``scale * q`` when d = 1).

    Returns the exact number ``q*sqrt(d)``; the caller keeps track of ``scale``.
    """

    scale = mpmath.mpc(scale)
    if scale == 0:
        raise DomainError("scale must be nonzero")
    tol = default_tolerance() if tol is None else mpmath.mpf(tol)
    y = mpmath.mpc(x) / scale
    local_tol = tol / abs(scale)
    if d == 1:
        q = rational_reconstruct(y, max_denominator, local_tol)
        return None if q is None else clean(q)
    radicand = squarefree_part(d)
    root = mpmath.sqrt(radicand)
    factor = math.isqrt(d // radicand)
    q = rational_reconstruct(y / (root * factor), max_denominator, local_tol / abs(root * factor))
    if q is None:
        return None
    return clean(QuadScalar(Fraction(0), q * factor, radicand))


def stable_reconstruct(
    compute: Callable[[int], object],
    recognize: Callable[[object], object],
    ladder: Sequence[int],
):
    """Run ``compute`` along a precision ladder until two rungs recognize equally.

    ``compute(bits)`` returns a numeric payload, ``recognize(payload)`` turns it
    into an exact value or ``None``.  Returns ``(exact, payload, bits)``.
    """

    previous = None
    payload = None
    for bits in ladder:
        with working_precision(bits):
            payload = compute(bits)
            exact = recognize(payload)
        logger.debug("reconstruction at %d bits: %s", bits, "ok" if exact is not None else "failed")
        if exact is not None and previous is not None and exact == previous:
            return exact, payload, bits
        previous = exact
    raise PrecisionError(f"no stable reconstruction along precision ladder {list(ladder)}")


def all_close(values: Iterable, targets: Iterable, tol) -> bool:
    return all(abs(mpmath.mpc(v) - mpmath.mpc(t)) < tol for v, t in zip(values, targets))
