from __future__ import annotations

from fractions import Fraction

import mpmath
import pytest

from magmod.groups import CongruenceSubgroup, GroupElement, S, T
from magmod.periods import (
    PeriodPolynomial,
    coboundary,
    cocycle,
    format_polynomial,
    generators_for,
    magnetic_period_test,
    omega_split,
    polynomial_slash,
    top_coboundary,
)
from magmod.scalars import DomainError, PathError, QuadScalar

OMEGA_E4J = "0.0610392510075"


def test_polynomial_slash_substitutes_the_matrix():
    assert polynomial_slash([1, 0, 0], T) == [1, 2, 1]
    assert polynomial_slash([0, 0, 1], S) == [1, 0, 0]
    assert top_coboundary(S, 2) == [1, 0, -1]
    assert top_coboundary(T, 2) == [0, 0, 0]


def test_coboundaries_satisfy_the_cocycle_relation():
    P = [Fraction(1), Fraction(2), Fraction(-3)]
    gamma, delta = S, GroupElement(1, 0, 2, 1)
    lhs = coboundary(P, gamma @ delta)
    rhs = [x + y for x, y in zip(polynomial_slash(coboundary(P, gamma), delta), coboundary(P, delta))]
    assert lhs == rhs


def test_format_polynomial():
    assert format_polynomial([Fraction(1, 2), 0, -1]) == "(1/2)*X^2 + (-1)*Y^2"
    assert format_polynomial([0, 0]) == "0"


def test_omega_split_recovers_a_synthetic_cocycle():
    with mpmath.workprec(160):
        omega = mpmath.mpf(OMEGA_E4J)
        scale = (2j * mpmath.pi) ** 2 * mpmath.sqrt(mpmath.mpf(-3))
        exact = [Fraction(0), Fraction(1, 576), Fraction(0)]
        top = top_coboundary(S, 2)
        numeric = [scale * mpmath.mpf(e.numerator) / e.denominator + omega * int(b) for e, b in zip(exact, top)]
        split = omega_split(PeriodPolynomial(S, 4, numeric), d=-3)
        assert split.ok
        assert split.exact == [0, QuadScalar(0, Fraction(1, 576), -3), 0]
        assert abs(split.omega - omega) < mpmath.mpf(10) ** -30
        assert split.reassemble()[0] == pytest.approx(complex(numeric[0]))


def test_omega_split_reports_failure():
    with mpmath.workprec(256):
        C = PeriodPolynomial(T, 4, [mpmath.mpc(mpmath.pi), mpmath.mpc(mpmath.e), mpmath.mpc(mpmath.sqrt(2))])
        split = omega_split(C)
        assert not split.ok
        assert "no rational remainder" in split.diagnostic


def test_cocycle_of_a_translation_vanishes(ctx, catalog, config):
    C = cocycle("E4j", T, ctx=ctx, catalog=catalog, config=config)
    assert all(v == 0 for v in C.numeric)


def test_cocycle_argument_checks(ctx, catalog, config):
    with pytest.raises(DomainError):
        cocycle("j", S, ctx=ctx, catalog=catalog, config=config)
    with pytest.raises(PathError):
        cocycle("E4j", S, path_re=Fraction(1, 2), ctx=ctx, catalog=catalog, config=config)


def test_generator_sets(config):
    assert generators_for(CongruenceSubgroup.parse("SL2(Z)"), config) == [S, T]
    with pytest.raises(DomainError):
        generators_for(CongruenceSubgroup.parse("Gamma0(11)"), config)


@pytest.mark.slow
def test_e4_over_j_period_at_s(ctx, catalog, config):
    split = omega_split(cocycle("E4j", S, ctx=ctx, catalog=catalog, config=config), d=-3)
    assert split.exact == [0, QuadScalar(0, Fraction(1, 576), -3), 0]
    assert abs(mpmath.re(split.omega) - mpmath.mpf(OMEGA_E4J)) < mpmath.mpf(10) ** -12


@pytest.mark.slow
@pytest.mark.parametrize("gamma", [S, GroupElement(1, 0, 1, 1)])
def test_split_period_reassembles_the_cocycle(ctx, catalog, config, gamma):
    C = cocycle("E4j", gamma, ctx=ctx, catalog=catalog, config=config)
    split = omega_split(C, d=-3)
    assert split.ok
    with mpmath.workprec(ctx.precision):
        for rebuilt, value in zip(split.reassemble(), C.numeric):
            assert abs(rebuilt - value) < mpmath.mpf(2) ** -60 * max(1, abs(value))


@pytest.mark.slow
def test_phitilde_periods_do_not_vanish(ctx, catalog, config):
    result = magnetic_period_test("phitilde", ctx=ctx, catalog=catalog, config=config)
    assert not result.vanishes
    assert result.lattice.radicands == [-2]
    assert result.verdict == "C_f != 0"


@pytest.mark.slow
def test_phi_periods_vanish(ctx, catalog, config):
    assert magnetic_period_test("phi", ctx=ctx, catalog=catalog, config=config).vanishes
