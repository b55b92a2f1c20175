"""Real-analytic modular forms f_(r,s) built from iterated Eichler integrals."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

import mpmath

from .catalog import Catalog, CatalogEntry, default_catalog
from .config import Config, default_config
from .evaluator import EvalContext
from .groups import GroupElement
from .periods import (
    PeriodIntegrator,
    cocycle,
    generators_for,
    magnetic_period_test,
    omega_split,
    residue_lattice,
    top_coboundary,
)
from .scalars import DomainError, PathError, PoleProximityError

logger = logging.getLogger(__name__)


@dataclass
class RealAnalyticSample:
    tau: mpmath.mpc
    integrals: List[mpmath.mpf]
    frs: List[mpmath.mpc]

    def to_json(self) -> dict:
        digits = max(15, mpmath.mp.dps)
        n = len(self.frs) - 1
        return {
            "tau": [mpmath.nstr(self.tau.real, digits), mpmath.nstr(self.tau.imag, digits)],
            "I": [mpmath.nstr(v, digits) for v in self.integrals],
            "frs": {
                f"{n - i},{i}": [mpmath.nstr(mpmath.re(v), digits), mpmath.nstr(mpmath.im(v), digits)]
                for i, v in enumerate(self.frs)
            },
        }


# ---------------------------------------------------------------------------
# Change of basis
# ---------------------------------------------------------------------------


def _matrix_k4(tau, taubar) -> List[List[mpmath.mpc]]:
    scale = 1 / (tau - taubar) ** 2
    rows = [
        [taubar**2, -2 * taubar, 1],
        [-2 * tau * taubar, 2 * (tau + taubar), -2],
        [tau**2, -2 * tau, 1],
    ]
    return [[scale * x for x in row] for row in rows]


def _matrix_k6(tau, taubar) -> List[List[mpmath.mpc]]:
    t, u = tau, taubar
    scale = 1 / (t - u) ** 4
    rows = [
        [u**4, -4 * u**3, 6 * u**2, -4 * u, 1],
        [-4 * t * u**3, 4 * u**3 + 12 * t * u**2, -12 * u**2 - 12 * t * u, 12 * u + 4 * t, -4],
        [6 * t**2 * u**2, -12 * t * u * (t + u), 6 * ((t + u) ** 2 + 2 * t * u), -12 * (t + u), 6],
        [-4 * u * t**3, 4 * t**3 + 12 * u * t**2, -12 * t**2 - 12 * t * u, 12 * t + 4 * u, -4],
        [t**4, -4 * t**3, 6 * t**2, -4 * t, 1],
    ]
    return [[scale * x for x in row] for row in rows]


def frs_matrix_general(tau, k: int) -> List[List[mpmath.mpc]]:
    """Rows r = k-2, ..., 0: C(n,r) (-1)^s (taubar - t)^r (tau - t)^s / (tau - taubar)^n in powers of t."""

    n = k - 2
    tau = mpmath.mpc(tau)
    taubar = mpmath.conj(tau)
    scale = 1 / (tau - taubar) ** n
    rows = []
    for r in range(n, -1, -1):
        s = n - r
        left = [mpmath.binomial(r, i) * taubar ** (r - i) * (-1) ** i for i in range(r + 1)]
        right = [mpmath.binomial(s, i) * tau ** (s - i) * (-1) ** i for i in range(s + 1)]
        product = [mpmath.mpc(0)] * (n + 1)
        for i, x in enumerate(left):
            for j, y in enumerate(right):
                product[i + j] += x * y
        factor = math.comb(n, r) * (-1) ** s * scale
        rows.append([factor * x for x in product])
    return rows


def frs_matrix(tau, k: int) -> List[List[mpmath.mpc]]:
    if k % 2 or k < 4:
        raise DomainError("f_(r,s) are built for even weight k >= 4")
    tau = mpmath.mpc(tau)
    if tau.imag <= 0:
        raise DomainError("tau must lie in the upper half-plane")
    taubar = mpmath.conj(tau)
    if k == 4:
        return _matrix_k4(tau, taubar)
    if k == 6:
        return _matrix_k6(tau, taubar)
    return frs_matrix_general(tau, k)


def frs_components(integrals: Sequence, tau, omega, k: int) -> List[mpmath.mpc]:
    """f_(r,s)(tau) for r = k-2, ..., 0 from (I_0, ..., I_(k-2)).

    The integrals are real, so f_(s,r) is the conjugate of f_(r,s) and only
    f_(n/2,n/2) is real.
    """

    column = list(integrals)
    column[-1] = column[-1] - mpmath.re(omega)
    return [mpmath.fsum(a * b for a, b in zip(row, column)) for row in frs_matrix(tau, k)]


# ---------------------------------------------------------------------------
# Integrals and the form object
# ---------------------------------------------------------------------------


class RealAnalyticForm:
    """f_(r,s) for one catalog entry with vanishing periods and imaginary residue lattice."""

    def __init__(self, entry, omega=None, catalog: Optional[Catalog] = None,
                 ctx: Optional[EvalContext] = None, config: Optional[Config] = None,
                 verify_periods: bool = True) -> None:
        self.catalog = catalog or default_catalog()
        self.ctx = ctx or EvalContext()
        self.config = config or default_config()
        self.entry: CatalogEntry = self.catalog.get(entry) if isinstance(entry, str) else entry
        self.k = self.entry.weight
        if self.k % 2 or self.k < 4:
            raise DomainError("f_(r,s) are built for even weight k >= 4")
        self.integrator = PeriodIntegrator(self.entry, self.catalog, self.ctx, self.config)
        self.omega = omega if omega is not None else self._prepare(verify_periods)

    def _prepare(self, verify_periods: bool) -> mpmath.mpc:
        with mpmath.workprec(self.ctx.precision + self.ctx.guard_bits):
            lattice = residue_lattice(self.entry, self.ctx, self.catalog, self.config)
            tol = mpmath.mpf(2) ** (-(self.ctx.precision // 2))
            if any(abs(mpmath.re(g)) > tol * abs(g) for g in lattice.basis()):
                raise DomainError(f"{self.entry.name}: residue lattice is not purely imaginary")
            radicand = lattice.radicands[0] if lattice.radicands else 1
            if verify_periods:
                test = magnetic_period_test(self.entry, ctx=self.ctx, catalog=self.catalog, config=self.config)
                if not test.vanishes:
                    raise DomainError(f"{self.entry.name}: periods do not vanish")
                cocycles = test.cocycles
            else:
                cocycles = [cocycle(self.entry, g, ctx=self.ctx, catalog=self.catalog, config=self.config)
                            for g in generators_for(self.entry.group, self.config)
                            if any(top_coboundary(g, self.k - 2))]
            for C in cocycles:
                if not any(top_coboundary(C.gamma, self.k - 2)):
                    continue
                split = omega_split(C, d=radicand)
                if split.ok and split.omega is not None:
                    logger.info("%s: omega = %s from %s", self.entry.name, mpmath.nstr(split.omega, 15), C.gamma)
                    return split.omega
        raise DomainError(f"{self.entry.name}: no generator determines omega")

    def integrals(self, tau, via=None) -> List[mpmath.mpf]:
        """I_j(tau) = Re((2 pi i)^(k-1)/(k-2)! * integral from i*infinity to tau of t^j f)."""

        n = self.k - 2
        with mpmath.workprec(self.ctx.precision + self.ctx.guard_bits):
            tau = mpmath.mpc(tau)
            if tau.imag <= 0:
                raise DomainError("tau must lie in the upper half-plane")
            try:
                moments = self._to_infinity(tau if via is None else mpmath.mpc(via))
                if via is not None:
                    moments = [a + b for a, b in zip(self.integrator.segment(tau, via), moments)]
            except PoleProximityError as exc:
                raise PathError(f"{self.entry.name}: path to {mpmath.nstr(tau, 10)} meets a pole") from exc
            prefactor = (2j * mpmath.pi) ** (self.k - 1) / mpmath.factorial(n)
            return [mpmath.re(-prefactor * m) for m in moments]

    def _to_infinity(self, start: mpmath.mpc) -> List[mpmath.mpc]:
        height = self.integrator.split_height()
        if start.imag >= height:
            return self.integrator.tail(start.real, start.imag)
        top = mpmath.mpc(start.real, height)
        lower = self.integrator.segment(start, top)
        return [a + b for a, b in zip(lower, self.integrator.tail(start.real, height))]

    def sample(self, tau, via=None) -> RealAnalyticSample:
        values = self.integrals(tau, via)
        with mpmath.workprec(self.ctx.precision + self.ctx.guard_bits):
            components = frs_components(values, tau, self.omega, self.k)
        return RealAnalyticSample(mpmath.mpc(tau), values, components)

    def check_modularity(self, gamma: GroupElement, tau) -> mpmath.mpf:
        """max |f_(r,s)(gamma tau) - (c tau + d)^r (c taubar + d)^s f_(r,s)(tau)|.

        Two paths to the same point differ by an element of the residue lattice,
        which the constructor requires to be purely imaginary.  The integrals keep
        only real parts, so that ambiguity is already gone and no lattice shift
        is minimized over.
        """

        if not self.entry.group.contains(gamma):
            raise DomainError(f"{gamma} is not an element of {self.entry.group.tag}")
        n = self.k - 2
        with mpmath.workprec(self.ctx.precision + self.ctx.guard_bits):
            tau = mpmath.mpc(tau)
            here = self.sample(tau).frs
            there = self.sample(gamma.act(tau)).frs
            j = gamma.automorphy(tau)
            jbar = mpmath.conj(j)
            deviation = mpmath.mpf(0)
            for i, (a, b) in enumerate(zip(there, here)):
                r, s = n - i, i
                deviation = max(deviation, abs(a - j**r * jbar**s * b))
        logger.info("%s: modularity defect under %s is %s", self.entry.name, gamma, mpmath.nstr(deviation, 5))
        return deviation

    def grid(self, x0, x1, y0, y1, count: int) -> List[RealAnalyticSample]:
        samples = []
        for ix in range(count):
            for iy in range(count):
                x = x0 + (x1 - x0) * mpmath.mpf(ix) / max(count - 1, 1)
                y = y0 + (y1 - y0) * mpmath.mpf(iy) / max(count - 1, 1)
                try:
                    samples.append(self.sample(mpmath.mpc(x, y)))
                except PathError as exc:
                    logger.warning("skipping grid point %s: %s", mpmath.nstr(mpmath.mpc(x, y), 8), exc)
        return samples


def write_grid_csv(samples: Sequence[RealAnalyticSample], path: Path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        if samples:
            n = len(samples[0].frs) - 1
            names = [f"f_{n - i}_{i}" for i in range(n + 1)]
            writer.writerow(["re_tau", "im_tau"] + [f"{part}_{name}" for name in names for part in ("re", "im")])
        for sample in samples:
            writer.writerow(
                [mpmath.nstr(sample.tau.real, 20), mpmath.nstr(sample.tau.imag, 20)]
                + [mpmath.nstr(part, 20) for v in sample.frs for part in (mpmath.re(v), mpmath.im(v))]
            )
    logger.info("wrote %d samples to %s", len(samples), path)
    return path


def monomial_integrals(entry, tau, ctx: Optional[EvalContext] = None, catalog: Optional[Catalog] = None,
                       config: Optional[Config] = None, via=None) -> List[mpmath.mpf]:
    form = RealAnalyticForm(entry, omega=0, catalog=catalog, ctx=ctx, config=config)
    return form.integrals(tau, via)


def check_modularity(entry, gamma: GroupElement, tau, ctx: Optional[EvalContext] = None,
                     catalog: Optional[Catalog] = None, config: Optional[Config] = None,
                     omega=None) -> mpmath.mpf:
    form = RealAnalyticForm(entry, omega=omega, catalog=catalog, ctx=ctx, config=config)
    return form.check_modularity(gamma, tau)
