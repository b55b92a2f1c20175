from __future__ import annotations

import random
from dataclasses import replace
from fractions import Fraction

import pytest

from magmod.magnetic import (
    BOL_IMAGE_PART,
    MIXED,
    NEITHER,
    REFUTED,
    STRONGLY_MAGNETIC,
    check_depth,
    classify_strong,
    max_depth,
)
from magmod.qseries import FourierExpansion, bol_image
from magmod.scalars import DomainError, QuadScalar, TruncationError


def powers(exponent: int, scale: Fraction = Fraction(1), trunc: int = 65) -> FourierExpansion:
    return FourierExpansion(1, {n: scale * n ** exponent for n in range(1, trunc)}, trunc)


def test_linear_coefficients_have_depth_one():
    report = check_depth(powers(1), 1, 64)
    assert report.consistent
    assert report.bounding_denominator == 1
    assert report.per_prime_evidence == {}


def test_reciprocal_quotients_are_refuted():
    report = check_depth(powers(1), 2, 64)
    assert report.verdict == REFUTED
    assert report.bounding_denominator is None
    assert "at 2" in report.witness


def test_bounded_denominator_is_reported():
    report = check_depth(powers(1, Fraction(1, 3)), 1, 64)
    assert report.consistent
    assert report.bounding_denominator == 3
    assert report.per_prime_evidence == {3: -1}
    assert report.to_json()["per_prime_evidence"] == {"3": -1}


def test_max_depth_stops_at_the_first_failure():
    assert max_depth(powers(2), 64, 6) == 2
    assert max_depth(powers(0), 64, 4) == 0


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_bol_image_of_an_integral_expansion(seed):
    rng = random.Random(seed)
    g = FourierExpansion(1, {n: rng.randint(-50, 50) for n in range(-2, 70)}, 70)
    report = check_depth(bol_image(g, 4), 3, 64)
    assert report.consistent
    assert report.bounding_denominator == 1


def test_depth_must_be_positive():
    with pytest.raises(DomainError):
        check_depth(powers(1), 0, 10)


def test_short_expansion_is_a_range_error():
    with pytest.raises(TruncationError):
        check_depth(powers(1, trunc=10), 1, 20)


def test_irrational_coefficients_are_rejected():
    f = FourierExpansion(1, {1: QuadScalar.sqrt(2)}, 5)
    with pytest.raises(DomainError):
        check_depth(f, 1, 4)


def test_catalog_forms_at_small_bounds(catalog):
    assert check_depth(catalog.expansion("phi", 60), 1, 60).bounding_denominator == 1
    assert check_depth(catalog.expansion("E4j", 60), 1, 60).consistent
    assert check_depth(catalog.expansion("E6j", 60), 2, 60).consistent


@pytest.mark.slow
def test_e4_over_j_is_not_depth_two(catalog):
    assert not check_depth(catalog.expansion("E4j", 500), 2, 500).consistent


@pytest.mark.slow
def test_claimed_depths_hold_to_five_hundred(catalog):
    for entry in catalog.entries():
        if entry.depth is None:
            continue
        report = check_depth(catalog.expansion(entry.name, 500 // entry.grid + 1), entry.depth, 500)
        assert report.consistent, entry.name


def test_strong_classification(catalog):
    phi = catalog.get("phi")
    assert classify_strong(phi, 1, [2, 2]) == STRONGLY_MAGNETIC
    assert classify_strong(phi, 3, [4]) == BOL_IMAGE_PART
    assert classify_strong(phi, 1, [4]) == MIXED
    assert classify_strong(phi, 0, [2]) == NEITHER
    assert classify_strong(replace(phi, weight=5), 4, [1]) == NEITHER
