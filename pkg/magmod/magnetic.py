"""Depth tests for magnetic modular forms and the strong classification."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional

from sympy import primefactors, primerange

from .catalog import CatalogEntry
from .qseries import FourierExpansion
from .scalars import DomainError, QuadScalar, TruncationError, padic_valuation

logger = logging.getLogger(__name__)

CONSISTENT = "consistent"
REFUTED = "refuted"

STRONGLY_MAGNETIC = "strongly-magnetic"
BOL_IMAGE_PART = "bol-image-part"
MIXED = "mixed"
NEITHER = "neither"


@dataclass
class MagneticityReport:
    """Evidence gathered for one depth.

    ``bounding_denominator`` is ``None`` when the verdict is refuted.
    """

    depth_tested: int
    n_max: int
    bounding_denominator: Optional[int]
    per_prime_evidence: Dict[int, int] = field(default_factory=dict)
    verdict: str = CONSISTENT
    witness: Optional[str] = None

    @property
    def consistent(self) -> bool:
        return self.verdict == CONSISTENT

    def to_json(self) -> dict:
        return {
            "depth_tested": self.depth_tested,
            "n_max": self.n_max,
            "bounding_denominator": self.bounding_denominator,
            "per_prime_evidence": {str(p): v for p, v in sorted(self.per_prime_evidence.items())},
            "verdict": self.verdict,
            "witness": self.witness,
        }


def _rational(value) -> Fraction:
    if isinstance(value, QuadScalar):
        if value.b:
            raise DomainError("magneticity is tested on expansions with rational coefficients")
        return value.a
    return Fraction(value)


def _quotients(f: FourierExpansion, d: int, n_max: int) -> Dict[int, Fraction]:
    if f.trunc <= n_max:
        raise TruncationError(f"expansion known below index {f.trunc}, need {n_max + 1}")
    return {n: _rational(v) / Fraction(n) ** d for n, v in f.items() if n != 0 and abs(n) <= n_max}


def _chain_decreasing(valuations: List[int]) -> bool:
    tail = valuations[-3:]
    return len(tail) == 3 and tail[0] > tail[1] > tail[2] and tail[2] < 0


def _prefix_minima_decreasing(quotients: Dict[int, Fraction], p: int, n_max: int) -> bool:
    # minimum valuation over n <= n_max/p^2, n_max/p and n_max
    minima = []
    for bound in (n_max // (p * p), n_max // p, n_max):
        values = [padic_valuation(q, p) for n, q in quotients.items() if abs(n) <= bound and q]
        minima.append(min(values) if values else math.inf)
    return minima[0] > minima[1] > minima[2] and minima[2] < 0


def check_depth(f: FourierExpansion, d: int, n_max: int) -> MagneticityReport:
    """Test whether a_n / n^d have bounded denominators for 0 < |n| <= n_max."""

    if d < 1:
        raise DomainError("depth must be at least 1")
    quotients = _quotients(f, d, n_max)
    denominator = 1
    for q in quotients.values():
        denominator = denominator * q.denominator // math.gcd(denominator, q.denominator)
    evidence: Dict[int, int] = {}
    for q in quotients.values():
        for p in _primes_of(q.denominator):
            evidence[p] = min(evidence.get(p, 0), padic_valuation(q, p))
    report = MagneticityReport(d, n_max, denominator, evidence)
    for p in primerange(2, n_max + 1):
        chain = []
        power = p
        while power <= n_max:
            if power in quotients and quotients[power]:
                chain.append(padic_valuation(quotients[power], p))
            power *= p
        if _chain_decreasing(chain) or _prefix_minima_decreasing(quotients, p, n_max):
            report.verdict = REFUTED
            report.bounding_denominator = None
            report.witness = f"valuations at {p} keep decreasing: {chain}"
            logger.info("depth %d refuted at prime %d", d, p)
            break
    return report


def _primes_of(n: int) -> Iterable[int]:
    return primefactors(n) if n > 1 else ()


def max_depth(f: FourierExpansion, n_max: int, k: int) -> int:
    """Largest d <= k - 1 with a consistent verdict, 0 when depth 1 fails."""

    best = 0
    for d in range(1, max(k, 1)):
        if not check_depth(f, d, n_max).consistent:
            break
        best = d
    return best


def classify_strong(entry: CatalogEntry, depth: int, pole_orders: Iterable[int]) -> str:
    """Place an entry among strongly magnetic forms and Bol images."""

    k = entry.weight
    orders = list(pole_orders)
    if k % 2:
        return NEITHER
    if k > 2 and depth >= k // 2 - 1 and all(order <= k // 2 for order in orders):
        return STRONGLY_MAGNETIC
    if depth >= k - 1 and orders and all(order >= k for order in orders):
        return BOL_IMAGE_PART
    if depth >= 1:
        return MIXED
    return NEITHER
