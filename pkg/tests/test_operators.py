from __future__ import annotations

from fractions import Fraction

import pytest

from magmod.groups import GroupElement, S, T, atkin_lehner_matrix
from magmod.operators import SlashEngine, atkin_lehner, hecke
from magmod.qseries import FourierExpansion
from magmod.scalars import DomainError, TruncationError


def test_delta_is_a_hecke_eigenform(catalog):
    delta = catalog.expansion("Delta", 20)
    image = hecke(delta, 2, 12)
    assert image.trunc == 10
    assert image.agrees_with(delta.scale(-24))


def test_e4_eigenvalue_is_a_divisor_sum(catalog):
    e4 = catalog.expand_expr("E4", 30)
    assert hecke(e4, 3, 4).agrees_with(e4.scale(28))


def test_weight_zero_uses_reciprocal_divisor_powers(catalog):
    image = hecke(catalog.expansion("j", 10), 2, 0)
    assert image.coefficient(-2) == Fraction(1, 2)
    assert image.coefficient(-1) == 0


def test_coprime_hecke_operators_compose(catalog):
    f = catalog.expansion("E4j", 360)
    composed = hecke(hecke(f, 3, 4), 2, 4)
    assert composed.trunc == 60
    assert composed.agrees_with(hecke(f, 6, 4), 60)


def test_hecke_preserves_depth_one_divisibility(catalog):
    image = hecke(catalog.expansion("E4j", 40), 3, 4)
    assert all(Fraction(v) / n == int(Fraction(v) / n) for n, v in image.items() if n)


def test_hecke_argument_checks(catalog):
    phi = catalog.expansion("phi", 20)
    with pytest.raises(DomainError):
        hecke(phi, 2, 4, N=8)
    with pytest.raises(DomainError):
        hecke(phi, 0, 4)
    with pytest.raises(TruncationError):
        hecke(FourierExpansion.from_list([1, 2]), 3, 4)


def test_identify_finds_the_scaled_family_member(catalog, config):
    engine = SlashEngine(catalog, config)
    image = catalog.expansion("E4j", 10).scale(3)
    assert engine.identify(image, [catalog.get("E6j"), catalog.get("E4j")]) == (3, "E4j")
    assert engine.identify(image, [catalog.get("E6j")]) is None


def test_odd_weight_needs_determinant_one(catalog, config):
    engine = SlashEngine(catalog, config)
    with pytest.raises(DomainError):
        engine.slash("E4j", GroupElement(2, 0, 0, 1), k=3)
    with pytest.raises(DomainError):
        atkin_lehner("C4", 2, k=3, catalog=catalog, config=config)


@pytest.mark.slow
def test_translation_fixes_a_level_one_form(catalog, config):
    image = SlashEngine(catalog, config).slash("E4j", T, terms=6)
    assert image.agrees_with(catalog.expansion("E4j", 6))


@pytest.mark.slow
def test_atkin_lehner_fixes_c4(catalog, config):
    image = atkin_lehner("C4", 2, catalog=catalog, config=config)
    assert SlashEngine(catalog, config).identify(image, [catalog.get("C4")]) == (1, "C4")


def test_plan_window_counts_whole_powers_of_q(catalog, config):
    plan = SlashEngine(catalog, config).plan(catalog.get("H4a"), atkin_lehner_matrix(3, 6), 6, 256, terms=12)
    assert (plan.lo, plan.hi) == (-12, 72)
    assert plan.height > plan.height_bound
    assert plan.samples > plan.hi - plan.lo


@pytest.mark.slow
def test_atkin_lehner_w3_fixes_h4a(catalog, config):
    image = atkin_lehner("H4a", 3, catalog=catalog, config=config)
    assert image.order_bound == 12
    assert SlashEngine(catalog, config).identify(image, [catalog.get("H4a")]) == (1, "H4a")


@pytest.mark.slow
def test_c4_family_action_table(catalog, config):
    table = SlashEngine(catalog, config).action_table(["C4", "D4a", "D4b"], [S, T])
    assert table[("C4", str(S))] == (Fraction(1, 256), "D4a")
    assert table[("D4a", str(S))] == (Fraction(256), "C4")
    assert table[("D4a", str(T))] == (Fraction(-1), "D4b")
    assert table[("D4b", str(S))] == (Fraction(1), "D4b")


@pytest.mark.slow
def test_level_one_orbit_is_a_single_image(catalog, config):
    images = SlashEngine(catalog, config).coset_orbit("E4j")
    assert len(images) == 1
    assert images[0].expansion is not None
