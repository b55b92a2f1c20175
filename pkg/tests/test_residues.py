from __future__ import annotations

from fractions import Fraction

import mpmath
import pytest

from magmod.evaluator import EvalContext, Evaluator
from magmod.residues import cm_point, find_poles, laurent_order, recognize_cm, residue_vector
from magmod.scalars import QuadScalar

RHO = (1, 1, 1)
RADIUS = mpmath.mpf(1) / 16


def root3(value: Fraction) -> QuadScalar:
    return QuadScalar(0, value, -3)


def test_cm_points_round_trip():
    with mpmath.workprec(128):
        assert recognize_cm(cm_point(RHO)) == RHO
        assert recognize_cm(cm_point((8, -4, 1))) == (8, -4, 1)
        assert recognize_cm(mpmath.mpc("0.1", mpmath.pi)) is None


def test_pole_orders(ctx, catalog, config):
    with mpmath.workprec(128):
        assert laurent_order("E4j", cm_point(RHO), ctx, catalog, config, radius=RADIUS) == 2
        assert laurent_order("E6j", cm_point(RHO), ctx, catalog, config, radius=RADIUS) == 3
        assert laurent_order("E4j", mpmath.mpc(0, 1), ctx, catalog, config, radius=RADIUS) == 0


def test_e4_over_j_residues_at_rho(ctx, catalog, config):
    vector = residue_vector("E4j", cm_point(RHO), ctx=ctx, catalog=catalog, config=config,
                            radius=RADIUS, cm_form=RHO)
    assert vector.ok
    assert vector.radicand == -3
    assert vector.exact == [root3(Fraction(-1, 288)), root3(Fraction(1, 576)), root3(Fraction(-1, 288))]
    assert vector.to_json()["scale"] == "1/(2*pi*i)^2"


def test_logarithmic_derivative_has_integral_residue(ctx, catalog, config):
    vector = residue_vector("jlog", cm_point(RHO), ctx=ctx, catalog=catalog, config=config,
                            radius=RADIUS, cm_form=RHO)
    assert vector.exact == [3]
    assert vector.radicand == 1


def test_catalog_poles_are_found_by_the_hauptmodul(ctx, catalog, config):
    records = find_poles("E4j", ctx, catalog, config)
    assert len(records) == 1
    assert records[0].order == 2
    assert records[0].cm_form == RHO
    assert records[0].discriminant == -3


@pytest.mark.slow
def test_phi_poles_and_residues(ctx, catalog, config):
    records = {r.cm_form: r for r in find_poles("phi", ctx, catalog, config)}
    assert set(records) == {(8, -4, 1), (8, 4, 1)}
    vector = residue_vector("phi", records[(8, -4, 1)].location, ctx=ctx, catalog=catalog, config=config,
                            cm_form=(8, -4, 1))
    assert vector.exact == [-1, Fraction(-1, 4), Fraction(-1, 8)]


def test_residues_do_not_depend_on_the_radius(catalog, config):
    ctx = EvalContext(precision=256)
    wide = residue_vector("E4j", cm_point(RHO), ctx=ctx, catalog=catalog, config=config, radius=RADIUS)
    narrow = residue_vector("E4j", cm_point(RHO), ctx=ctx, catalog=catalog, config=config, radius=RADIUS / 2)
    tol = mpmath.mpf(2) ** -100
    for a, b in zip(wide.numeric, narrow.numeric):
        assert abs(a - b) < tol * max(1, abs(a))
    assert wide.exact == narrow.exact


@pytest.mark.slow
def test_residues_in_a_period_strip_match_the_boundary_integral(ctx, catalog, config):
    # the two Gamma0(8) poles of phi sit at height 1/4; nothing else lies in the box
    forms = [(8, -4, 1), (8, 4, 1)]
    vectors = [residue_vector("phi", cm_point(f), ctx=ctx, catalog=catalog, config=config, cm_form=f)
               for f in forms]
    evaluator = Evaluator(catalog, ctx)
    with mpmath.workprec(ctx.precision):
        low, high, half = mpmath.mpf(3) / 20, mpmath.mpf(2) / 5, mpmath.mpf(1) / 2
        corners = [mpmath.mpc(-half, low), mpmath.mpc(half, low), mpmath.mpc(half, high), mpmath.mpc(-half, high)]
        for m in range(3):
            def integrand(tau):
                return tau ** m * evaluator.eval_entry("phi", tau)

            boundary = mpmath.mpc(0)
            for a, b in zip(corners, corners[1:] + corners[:1]):
                boundary += mpmath.quad(lambda s: integrand(a + s * (b - a)) * (b - a), [0, 1])
            boundary /= 2j * mpmath.pi
            residues = sum(v.numeric[m] for v in vectors)
            assert abs(boundary - residues) < mpmath.mpf(10) ** -20
