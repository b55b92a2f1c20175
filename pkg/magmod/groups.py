"""Matrices, congruence subgroups and their combinatorial data.

All group computations are projective: a matrix and its negative act in the
same way on the upper half-plane and, for the even weights used here, on
modular forms.
"""
from __future__ import annotations

import logging
import math
import re
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple, Union

import mpmath
from sympy import gcdex, jacobi_symbol

from .scalars import DomainError

logger = logging.getLogger(__name__)

Number = Union[int, Fraction]


def _mp(value: Fraction) -> mpmath.mpf:
    return mpmath.mpf(value.numerator) / value.denominator


@dataclass(frozen=True)
class GroupElement:
    """A 2x2 matrix (a b; c d) with rational entries and positive determinant."""

    a: Fraction
    b: Fraction
    c: Fraction
    d: Fraction

    def __post_init__(self) -> None:
        for name in ("a", "b", "c", "d"):
            object.__setattr__(self, name, Fraction(getattr(self, name)))
        if self.det <= 0:
            raise DomainError(f"matrix {self.entries()} must have positive determinant")

    @classmethod
    def parse(cls, text: str) -> "GroupElement":
        parts = [p for p in re.split(r"[,\s;]+", text.strip().strip("[]()")) if p]
        if len(parts) != 4:
            raise DomainError(f"expected four matrix entries, got {text!r}")
        return cls(*(Fraction(p.replace("−", "-")) for p in parts))

    @classmethod
    def from_list(cls, values: Sequence[Number]) -> "GroupElement":
        if len(values) != 4:
            raise DomainError(f"expected [a, b, c, d], got {values!r}")
        return cls(*(Fraction(str(v)) if isinstance(v, str) else Fraction(v) for v in values))

    @property
    def det(self) -> Fraction:
        return self.a * self.d - self.b * self.c

    def entries(self) -> Tuple[Fraction, Fraction, Fraction, Fraction]:
        return self.a, self.b, self.c, self.d

    def is_integral(self) -> bool:
        return all(x.denominator == 1 for x in self.entries())

    def is_sl2z(self) -> bool:
        return self.is_integral() and self.det == 1

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        return GroupElement(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def __neg__(self) -> "GroupElement":
        return GroupElement(-self.a, -self.b, -self.c, -self.d)

    def inverse(self) -> "GroupElement":
        det = self.det
        return GroupElement(self.d / det, -self.b / det, -self.c / det, self.a / det)

    def power(self, n: int) -> "GroupElement":
        base = self if n >= 0 else self.inverse()
        result = IDENTITY
        for _ in range(abs(n)):
            result = result @ base
        return result

    def act(self, tau):
        tau = mpmath.mpc(tau)
        return (_mp(self.a) * tau + _mp(self.b)) / (_mp(self.c) * tau + _mp(self.d))

    def automorphy(self, tau):
        """c*tau + d."""

        return _mp(self.c) * mpmath.mpc(tau) + _mp(self.d)

    def cusp_preimage(self) -> Optional[Fraction]:
        """gamma^{-1}(i*infinity) = -d/c, or None when gamma fixes infinity."""

        if self.c == 0:
            return None
        return -self.d / self.c

    def projectively_equal(self, other: "GroupElement") -> bool:
        return self == other or self == -other

    def to_json(self) -> List[Union[int, str]]:
        return [int(x) if x.denominator == 1 else str(x) for x in self.entries()]

    def __str__(self) -> str:
        return "({},{};{},{})".format(*self.to_json())


IDENTITY = GroupElement(1, 0, 0, 1)
S = GroupElement(0, 1, -1, 0)
T = GroupElement(1, 1, 0, 1)
T_INV = GroupElement(1, -1, 0, 1)
# tau -> -1/tau written with the other sign convention, used for reduction
_S_REDUCE = GroupElement(0, -1, 1, 0)


def reduce_to_fundamental_domain(tau, max_steps: int = 10000) -> Tuple[mpmath.mpc, GroupElement]:
    """Return (tau', gamma) with tau' = gamma(tau) in the standard domain of SL2(Z)."""

    tau = mpmath.mpc(tau)
    if tau.imag <= 0:
        raise DomainError(f"tau = {tau} is not in the upper half-plane")
    gamma = IDENTITY
    eps = mpmath.mpf(2) ** (-(mpmath.mp.prec // 2))
    for _ in range(max_steps):
        shift = int(mpmath.nint(tau.real))
        if shift:
            tau = tau - shift
            gamma = T.power(-shift) @ gamma
        if abs(tau) < 1 - eps:
            tau = -1 / tau
            gamma = _S_REDUCE @ gamma
            continue
        break
    return tau, gamma


def sl2z_max_height(tau) -> mpmath.mpf:
    """Largest imaginary part in the SL2(Z)-orbit of tau."""

    return reduce_to_fundamental_domain(tau)[0].imag


@lru_cache(maxsize=None)
def _short_words(length: int = 4) -> Tuple[GroupElement, ...]:
    letters = (S, T, T_INV)
    words = {IDENTITY}
    frontier = [IDENTITY]
    for _ in range(length):
        grown = []
        for word in frontier:
            for letter in letters:
                candidate = word @ letter
                if candidate not in words and -candidate not in words:
                    words.add(candidate)
                    grown.append(candidate)
        frontier = grown
    return tuple(words)


def _lift_bottom_row(c: int, d: int) -> Optional[GroupElement]:
    if math.gcd(c, d) != 1:
        return None
    # a*d - b*c = 1
    s, t, g = gcdex(d, -c)
    return GroupElement(int(s), int(t), c, d)


# ---------------------------------------------------------------------------
# Congruence subgroups
# ---------------------------------------------------------------------------

_TAG_PATTERN = re.compile(r"^\s*(?P<kind>Gamma0|Gamma1|Gamma|Γ₀|Γ₁|Γ)\s*\(\s*(?P<N>\d+)\s*\)\s*$")
_SL2Z_TAGS = {"SL2(Z)", "SL2Z", "SL_2(Z)", "SL₂(ℤ)", "Gamma0(1)", "Gamma1(1)", "Gamma(1)"}


@dataclass(frozen=True)
class CuspData:
    cusps: int
    widths: Tuple[int, ...]
    elliptic2: int
    elliptic3: int
    genus: int


@dataclass(frozen=True)
class CongruenceSubgroup:
    kind: str
    N: int

    @classmethod
    def parse(cls, tag: str) -> "CongruenceSubgroup":
        if tag.strip() in _SL2Z_TAGS:
            return cls("SL2Z", 1)
        match = _TAG_PATTERN.match(tag)
        if not match:
            raise DomainError(f"unsupported group {tag!r}")
        kind = {"Γ₀": "Gamma0", "Γ₁": "Gamma1", "Γ": "Gamma"}.get(match.group("kind"), match.group("kind"))
        N = int(match.group("N"))
        if N == 1:
            return cls("SL2Z", 1)
        return cls(kind, N)

    @property
    def tag(self) -> str:
        return "SL2(Z)" if self.kind == "SL2Z" else f"{self.kind}({self.N})"

    @property
    def level(self) -> int:
        return self.N

    @property
    def width(self) -> int:
        return self.N if self.kind == "Gamma" else 1

    def contains(self, g: GroupElement) -> bool:
        if not g.is_sl2z():
            return False
        a, b, c, d = (int(x) for x in g.entries())
        N = self.N
        if self.kind == "SL2Z":
            return True
        if c % N:
            return False
        if self.kind == "Gamma0":
            return True
        plus = a % N == 1 % N and d % N == 1 % N
        minus = a % N == (-1) % N and d % N == (-1) % N
        if self.kind == "Gamma1":
            return plus or minus
        return b % N == 0 and (plus or minus)

    # cosets ------------------------------------------------------------------
    def coset_representatives(self) -> Tuple[GroupElement, ...]:
        return _coset_representatives(self)

    @property
    def index(self) -> int:
        """Index of the image in PSL2(Z)."""

        return len(self.coset_representatives())

    def coset_of(self, g: GroupElement) -> int:
        for position, rep in enumerate(self.coset_representatives()):
            if self.contains(g @ rep.inverse()):
                return position
        raise DomainError(f"{g} lies in no coset of {self.tag}")

    def cusp_data(self) -> CuspData:
        return _cusp_data(self)

    @property
    def has_elliptic_points(self) -> bool:
        data = self.cusp_data()
        return bool(data.elliptic2 or data.elliptic3)

    @property
    def contains_minus_identity(self) -> bool:
        return self.contains_exact(GroupElement(-1, 0, 0, -1))

    def contains_exact(self, g: GroupElement) -> bool:
        """Membership in the matrix group itself (not projective)."""

        if not self.contains(g):
            return False
        if self.kind in ("SL2Z", "Gamma0"):
            return True
        return int(g.d) % self.N == 1 % self.N

    def dim_cusp_forms(self, k: int) -> int:
        """Dimension of S_k by the classical formula (regular cusps assumed)."""

        data = self.cusp_data()
        g, cusps = data.genus, data.cusps
        if k % 2 and self.contains_minus_identity:
            return 0
        if k < 2:
            raise DomainError("dimension formula implemented for k >= 2")
        if k == 2:
            return g
        dim = (k - 1) * (g - 1) + (k // 2 - 1) * cusps if k % 2 == 0 else (k - 1) * (g - 1) + (k - 2) * cusps // 2
        if k % 2 == 0:
            dim += data.elliptic2 * (k // 4) + data.elliptic3 * (k // 3)
        return dim

    # points --------------------------------------------------------------------
    def find_transform(self, z, w, tol=None) -> Optional[GroupElement]:
        """Return gamma in the group with gamma(z) = w, or None."""

        tol = mpmath.mpf(2) ** (-(mpmath.mp.prec // 3)) if tol is None else tol
        z_red, g_z = reduce_to_fundamental_domain(z)
        w_red, g_w = reduce_to_fundamental_domain(w)
        for sigma in _short_words():
            if abs(sigma.act(z_red) - w_red) < tol:
                candidate = g_w.inverse() @ sigma @ g_z
                if self.contains(candidate):
                    return candidate
        return None

    def equivalent(self, z, w, tol=None) -> bool:
        return self.find_transform(z, w, tol) is not None

    def lift(self, c: int, d: int) -> Optional[GroupElement]:
        """A group element with bottom row (c, d), if one exists."""

        base = _lift_bottom_row(c, d)
        if base is None:
            return None
        for t in range(max(self.N, 1)):
            candidate = GroupElement(base.a + t * c, base.b + t * d, c, d)
            if self.contains(candidate):
                return candidate
        return None

    def canonical_point(self, z) -> mpmath.mpc:
        """Representative of the orbit of z of maximal height, Re in (-w/2, w/2]."""

        z = mpmath.mpc(z)
        step = 1 if self.kind == "SL2Z" else self.N
        eps = mpmath.mpf(2) ** (-(mpmath.mp.prec // 2))
        for _ in range(1000):
            best = None
            best_size = mpmath.mpf(1) - eps
            c = step
            while c * z.imag < best_size:
                centre = -c * z.real
                for d in range(int(mpmath.floor(centre - 1)), int(mpmath.ceil(centre + 1)) + 1):
                    size = abs(c * z + d)
                    if size < best_size:
                        element = self.lift(c, d)
                        if element is not None:
                            best, best_size = element, size
                c += step
            if best is None:
                break
            z = best.act(z)
        width = self.width
        shift = mpmath.ceil(z.real / width - mpmath.mpf(1) / 2 - eps)
        return z - shift * width

    def __str__(self) -> str:
        return self.tag


@lru_cache(maxsize=None)
def _coset_representatives(group: CongruenceSubgroup) -> Tuple[GroupElement, ...]:
    reps: List[GroupElement] = [IDENTITY]
    queue = deque([IDENTITY])
    while queue:
        current = queue.popleft()
        for letter in (S, T, T_INV):
            candidate = current @ letter
            if any(group.contains(candidate @ rep.inverse()) for rep in reps):
                continue
            reps.append(candidate)
            queue.append(candidate)
    logger.debug("%s has %d cosets in PSL2(Z)", group.tag, len(reps))
    return tuple(reps)


@lru_cache(maxsize=None)
def _cusp_data(group: CongruenceSubgroup) -> CuspData:
    reps = group.coset_representatives()
    st = S @ T
    elliptic2 = sum(1 for r in reps if group.contains(r @ S @ r.inverse()))
    elliptic3 = sum(1 for r in reps if group.contains(r @ st @ r.inverse()))
    seen: Dict[int, bool] = {}
    widths = []
    for start in range(len(reps)):
        if start in seen:
            continue
        width = 0
        position = start
        while position not in seen:
            seen[position] = True
            width += 1
            position = group.coset_of(reps[position] @ T)
        widths.append(width)
    mu = len(reps)
    twelve_genus = 12 + mu - 3 * elliptic2 - 4 * elliptic3 - 6 * len(widths)
    return CuspData(len(widths), tuple(widths), elliptic2, elliptic3, twelve_genus // 12)


# ---------------------------------------------------------------------------
# Atkin-Lehner matrices and characters
# ---------------------------------------------------------------------------


def is_exact_divisor(Q: int, N: int) -> bool:
    return Q > 0 and N % Q == 0 and math.gcd(Q, N // Q) == 1


def atkin_lehner_matrix(Q: int, N: int) -> GroupElement:
    """(Qx, y; Nz, Qw) with determinant Q, y = 1 mod Q and x = 1 mod N/Q."""

    if not is_exact_divisor(Q, N):
        raise DomainError(f"{Q} is not an exact divisor of {N}")
    P = N // Q
    # Q*w - P*z = 1 with x = y = 1
    u, v, _ = gcdex(Q, P)
    w, z = int(u), -int(v)
    matrix = GroupElement(Q, 1, N * z, Q * w)
    assert matrix.det == Q
    return matrix


@dataclass(frozen=True)
class DirichletCharacter:
    """Trivial or quadratic Dirichlet character."""

    modulus: int
    quadratic: bool = False

    def __call__(self, x: int) -> int:
        if math.gcd(x, self.modulus) != 1:
            return 0
        if not self.quadratic:
            return 1
        if self.modulus % 2 == 0:
            raise DomainError("quadratic characters are supported for odd moduli only")
        return int(jacobi_symbol(x % self.modulus, self.modulus))


def trivial_character(modulus: int) -> DirichletCharacter:
    return DirichletCharacter(modulus)


# Coset representatives of Gamma1(6) in SL2(Z) as listed with the numerical
# evidence; the second twelve are gamma_13 * gamma_(i-13).
_GAMMA1_6_BASE = [
    (1, 0, 0, 1), (0, -1, 1, 0), (1, 0, 1, 1), (0, -1, 1, 2), (0, -1, 1, 3),
    (0, -1, 1, 4), (0, -1, 1, 5), (1, 0, 2, 1), (1, 1, 2, 3), (1, 2, 2, 5),
    (1, 0, 3, 1), (-1, -1, 3, 2), (-1, -2, 6, 11),
]
GAMMA1_6_COSETS: Tuple[GroupElement, ...] = tuple(GroupElement(*m) for m in _GAMMA1_6_BASE) + tuple(
    GroupElement(*_GAMMA1_6_BASE[12]) @ GroupElement(*m) for m in _GAMMA1_6_BASE[1:12]
)
