from __future__ import annotations

from fractions import Fraction

import mpmath
import pytest

from magmod.evaluator import (
    EvalContext,
    Evaluator,
    dedekind_sum,
    eval_eisenstein,
    eval_eta,
    eval_expansion,
    eval_theta,
)
from magmod.residues import cm_point
from magmod.scalars import DomainError, PoleProximityError, TruncationError

TIGHT = mpmath.mpf(10) ** -30


def direct(ctx: EvalContext) -> EvalContext:
    return EvalContext(precision=ctx.precision, fundamental_domain_reduction=False)


def test_context_validation():
    with pytest.raises(DomainError):
        EvalContext(precision=32)
    with pytest.raises(DomainError):
        EvalContext(precision=128, tail_bound_target=mpmath.mpf(1))


def test_dedekind_sums():
    assert dedekind_sum(1, 3) == Fraction(1, 18)
    assert dedekind_sum(1, 7) == Fraction(6 * 5, 12 * 7)
    assert dedekind_sum(3, 1) == 0


def test_eta_at_i(ctx):
    with mpmath.workprec(160):
        expected = mpmath.gamma(mpmath.mpf(1) / 4) / (2 * mpmath.pi ** (mpmath.mpf(3) / 4))
        assert abs(eval_eta(mpmath.mpc(0, 1), ctx) - expected) < TIGHT


@pytest.mark.parametrize("tau", [("0.31", "0.07"), ("-0.45", "0.2"), ("0.013", "0.31")])
def test_eta_multiplier_agrees_with_the_product(ctx, tau):
    with mpmath.workprec(160):
        point = mpmath.mpc(*tau)
        reduced = eval_eta(point, ctx)
        plain = eval_eta(point, direct(ctx))
        assert abs(reduced - plain) < TIGHT * max(1, abs(plain))


@pytest.mark.parametrize("k", [2, 4, 6])
def test_eisenstein_reduction(ctx, k):
    with mpmath.workprec(160):
        point = mpmath.mpc("0.21", "0.33")
        assert abs(eval_eisenstein(k, point, ctx) - eval_eisenstein(k, point, direct(ctx))) < TIGHT


def test_special_values(ctx, catalog):
    evaluator = Evaluator(catalog, ctx)
    with mpmath.workprec(160):
        i = mpmath.mpc(0, 1)
        assert abs(eval_eisenstein(6, i, ctx)) < TIGHT
        assert abs(evaluator.eval_entry("j", i) - 1728) < TIGHT * 1728
        assert abs(eval_eisenstein(4, cm_point((1, 1, 1)), ctx)) < TIGHT


def test_jacobi_identity(ctx):
    with mpmath.workprec(160):
        tau = mpmath.mpc("0.17", "0.61")
        lhs = eval_theta("theta3", tau, ctx) ** 4
        rhs = eval_theta("theta2", tau, ctx) ** 4 + eval_theta("theta4", tau, ctx) ** 4
        assert abs(lhs - rhs) < TIGHT * abs(lhs)


def test_expansion_and_product_agree(ctx, catalog):
    evaluator = Evaluator(catalog, ctx)
    with mpmath.workprec(160):
        tau = mpmath.mpc("0.1", "1.1")
        for name in ("E4j", "phi", "lambda"):
            series = eval_expansion(catalog.expansion(name, 80), tau, ctx)
            assert abs(series - evaluator.eval_entry(name, tau)) < mpmath.mpf(10) ** -25


def test_hecke_node_evaluates_like_its_closed_form(ctx, catalog):
    evaluator = Evaluator(catalog, ctx)
    with mpmath.workprec(160):
        tau = mpmath.mpc("0.1", "1.1")
        image = evaluator.eval_expr("(hecke E4j 2)", tau)
        closed = evaluator.eval_expr("(mul -72 (add 30375 (mul 7 j)) (pow (sub 54000 j) -2) E4)", tau)
        assert abs(image - closed) < mpmath.mpf(10) ** -25 * max(1, abs(closed))


@pytest.mark.parametrize("text", [
    "(diff E4)",
    "(diff (theta3 2))",
    "(diff (pow (eta 1) 24))",
    "(diff (diff (diff (mul E4 (inv E6)))))",
])
def test_diff_node_matches_the_differentiated_series(ctx, catalog, text):
    evaluator = Evaluator(catalog, ctx)
    with mpmath.workprec(160):
        tau = mpmath.mpc("0.05", "1.5")
        series = eval_expansion(catalog.expand_expr(text, 60), tau, ctx)
        value = evaluator.eval_expr(text, tau)
        assert abs(value - series) < mpmath.mpf(10) ** -20 * max(1, abs(series))
        assert abs(value) > mpmath.mpf(10) ** -6


def test_diff_of_a_hecke_node(ctx, catalog):
    evaluator = Evaluator(catalog, ctx)
    with mpmath.workprec(160):
        tau = mpmath.mpc("0.1", "1.1")
        image = evaluator.eval_expr("(diff (hecke E4j 2))", tau)
        closed = evaluator.eval_expr("(diff (mul -72 (add 30375 (mul 7 j)) (pow (sub 54000 j) -2) E4))", tau)
        assert abs(image - closed) < mpmath.mpf(10) ** -25 * max(1, abs(closed))


def test_small_delta_near_a_cusp_is_not_a_pole(catalog):
    ctx = EvalContext(precision=256)
    evaluator = Evaluator(catalog, ctx)
    with mpmath.workprec(300):
        tau = mpmath.mpc(0, "0.0625")
        value = evaluator.eval_entry("E4j", tau)
        # E4j(tau) = tau^-4 E4j(-1/tau)
        expected = tau ** -4 * evaluator.eval_entry("E4j", -1 / tau)
        assert abs(value - expected) < mpmath.mpf(10) ** -60 * abs(expected)
        assert abs(evaluator.eval_entry("j", tau)) > mpmath.mpf(10) ** 40


def test_pole_proximity_names_the_pole(ctx, catalog):
    with pytest.raises(PoleProximityError) as info:
        Evaluator(catalog, ctx).eval_entry("E4j", cm_point((1, 1, 1)))
    assert info.value.pole == "1*tau^2 + 1*tau + 1 = 0"


def test_lower_half_plane_is_rejected(ctx, catalog):
    with pytest.raises(DomainError):
        Evaluator(catalog, ctx).eval_entry("E4j", mpmath.mpc(0, -1))


def test_truncated_sum_refuses_a_large_tail(ctx, catalog):
    with pytest.raises(TruncationError):
        eval_expansion(catalog.expansion("E4j", 5), mpmath.mpc(0, "0.5"), ctx)


def test_eval_many_sequential(ctx, catalog):
    evaluator = Evaluator(catalog, ctx)
    points = [mpmath.mpc("0.1", "1.1"), mpmath.mpc("-0.2", "0.9")]
    values = evaluator.eval_many("E6j", points)
    assert values == [evaluator.eval_entry("E6j", p) for p in points]
