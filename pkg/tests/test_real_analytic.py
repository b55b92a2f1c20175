from __future__ import annotations

import csv
import math
import random

import mpmath
import pytest

from magmod.evaluator import EvalContext
from magmod.groups import S, T
from magmod.real_analytic import (
    RealAnalyticForm,
    RealAnalyticSample,
    frs_components,
    frs_matrix,
    frs_matrix_general,
    monomial_integrals,
    write_grid_csv,
)
from magmod.scalars import DomainError

OMEGA_E4J = "0.0610392510075"


@pytest.mark.parametrize("k", [4, 6])
def test_closed_form_matrices_match_the_binomial_expansion(k):
    with mpmath.workprec(128):
        tau = mpmath.mpc("0.3", "0.8")
        closed, general = frs_matrix(tau, k), frs_matrix_general(tau, k)
        for row_a, row_b in zip(closed, general):
            for a, b in zip(row_a, row_b):
                assert abs(a - b) < mpmath.mpf(10) ** -30


def test_matrix_argument_checks():
    with pytest.raises(DomainError):
        frs_matrix(mpmath.mpc(0, 1), 5)
    with pytest.raises(DomainError):
        frs_matrix(mpmath.mpc(0, 1), 2)
    with pytest.raises(DomainError):
        frs_matrix(mpmath.mpc(0, -1), 4)


def test_weight_two_is_rejected(ctx, catalog, config):
    with pytest.raises(DomainError):
        RealAnalyticForm("jlog", catalog=catalog, ctx=ctx, config=config)


def test_modularity_check_needs_a_group_element(ctx, catalog, config):
    form = RealAnalyticForm("phi", omega=0, catalog=catalog, ctx=ctx, config=config)
    with pytest.raises(DomainError):
        form.check_modularity(S, mpmath.mpc("0.1", "1.3"))


def test_grid_csv_layout(tmp_path):
    sample = RealAnalyticSample(mpmath.mpc("0.25", "1.5"), [mpmath.mpf(1)] * 3,
                                [mpmath.mpc(2, 1), mpmath.mpc(3, 0), mpmath.mpc(2, -1)])
    path = write_grid_csv([sample, sample], tmp_path / "frs.csv")
    with path.open(encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == ["re_tau", "im_tau", "re_f_2_0", "im_f_2_0", "re_f_1_1", "im_f_1_1", "re_f_0_2", "im_f_0_2"]
    assert len(rows) == 3
    assert rows[1][2:] == ["2.0", "1.0", "3.0", "0.0", "2.0", "-1.0"]
    assert sample.to_json()["frs"] == {"2,0": ["2.0", "1.0"], "1,1": ["3.0", "0.0"], "0,2": ["2.0", "-1.0"]}


@pytest.mark.slow
def test_e4_over_j_lift_is_modular(ctx, catalog, config):
    form = RealAnalyticForm("E4j", catalog=catalog, ctx=ctx, config=config)
    assert abs(mpmath.re(form.omega) - mpmath.mpf(OMEGA_E4J)) < mpmath.mpf(10) ** -12
    assert form.check_modularity(S, mpmath.mpc("0.1", "1.3")) < mpmath.mpf(10) ** -12
    assert form.check_modularity(T, mpmath.mpc("0.2", "1.2")) < mpmath.mpf(10) ** -12


@pytest.mark.parametrize("k", [4, 6, 8])
def test_components_recombine_to_the_monomial_polynomial(k):
    rng = random.Random(k)
    n = k - 2
    with mpmath.workprec(128):
        tau = mpmath.mpc(rng.uniform(-0.5, 0.5), rng.uniform(0.8, 2.0))
        integrals = [mpmath.mpf(rng.uniform(-3, 3)) for _ in range(n + 1)]
        omega = mpmath.mpf(rng.uniform(-1, 1))
        frs = frs_components(integrals, tau, omega, k)
        column = integrals[:-1] + [integrals[-1] - omega]
        for X, Y in [(1, 0), (0, 1), (mpmath.mpf("0.7"), mpmath.mpf("-1.3"))]:
            recombined = mpmath.fsum(
                f * (X - tau * Y) ** (n - i) * (X - mpmath.conj(tau) * Y) ** i for i, f in enumerate(frs)
            )
            expected = mpmath.fsum(math.comb(n, j) * (-Y) ** j * X ** (n - j) * c for j, c in enumerate(column))
            assert abs(recombined - expected) < mpmath.mpf(10) ** -30
        for i, f in enumerate(frs):
            assert abs(f - mpmath.conj(frs[n - i])) < mpmath.mpf(10) ** -30
        assert abs(mpmath.im(frs[n // 2])) < mpmath.mpf(10) ** -30


def test_integrals_vanish_towards_the_cusp(ctx, catalog, config):
    values = monomial_integrals("E4j", mpmath.mpc("0.1", "12"), ctx, catalog, config)
    assert len(values) == 3
    assert all(abs(v) < mpmath.mpf(10) ** -25 for v in values)


@pytest.mark.slow
def test_integrals_do_not_depend_on_the_path(ctx, catalog, config):
    tau = mpmath.mpc(0, 1)
    straight = monomial_integrals("E4j", tau, ctx, catalog, config)
    detour = monomial_integrals("E4j", tau, ctx, catalog, config, via=mpmath.mpc("0.3", "1.5"))
    for a, b in zip(straight, detour):
        assert abs(a - b) < mpmath.mpf(10) ** -25 * max(1, abs(a))


def _random_modular_pairs(seed: int, count: int):
    rng = random.Random(seed)
    letters = [S, T, T.inverse()]
    pairs = []
    while len(pairs) < count:
        gamma = letters[rng.randrange(3)]
        for _ in range(rng.randrange(3)):
            gamma = gamma @ letters[rng.randrange(3)]
        tau = mpmath.mpc(rng.uniform(-0.5, 0.5), rng.uniform(1.0, 1.6))
        if gamma.act(tau).imag > mpmath.mpf(1) / 4:
            pairs.append((gamma, tau))
    return pairs


@pytest.mark.slow
@pytest.mark.parametrize("name", ["E4j", "E6j"])
def test_lift_is_modular_at_random_points(catalog, config, name):
    ctx = EvalContext(precision=256)
    form = RealAnalyticForm(name, catalog=catalog, ctx=ctx, config=config)
    for gamma, tau in _random_modular_pairs(2024, 10):
        assert form.check_modularity(gamma, tau) < mpmath.mpf(2) ** -100
