from __future__ import annotations

from fractions import Fraction

import pytest

from magmod.qseries import FourierExpansion, bol_image, unify
from magmod.scalars import DomainError, QuadScalar, TruncationError


def geometric(trunc: int) -> FourierExpansion:
    return FourierExpansion.from_list([1] * trunc)


def test_coefficients_beyond_truncation_are_unknown():
    f = FourierExpansion.from_list([1, 2, 3])
    assert f.coefficient(2) == 3
    with pytest.raises(TruncationError):
        f.coefficient(3)
    with pytest.raises(TruncationError):
        FourierExpansion(1, {5: 1}, 5)


def test_zero_coefficients_are_dropped():
    f = FourierExpansion(1, {0: 0, 1: Fraction(2, 2)}, 3)
    assert f.coeffs == {1: 1}
    assert f.lead == 1


def test_inverse_of_one_minus_q():
    f = FourierExpansion.from_list([1, -1, 0, 0, 0, 0])
    inverse = f.invert()
    assert inverse.agrees_with(geometric(6))
    assert inverse.trunc == 6


def test_inverse_keeps_relative_precision():
    f = FourierExpansion(1, {1: 1, 2: -1}, 6)
    inverse = f.invert()
    assert inverse.lead == -1
    assert inverse.trunc == 4
    assert [inverse.coefficient(n) for n in range(-1, 4)] == [1, 1, 1, 1, 1]


def test_zero_has_no_inverse():
    with pytest.raises(DomainError):
        FourierExpansion.zero(1, 4).invert()


def test_product_truncation_follows_leading_terms():
    f = FourierExpansion(1, {-1: 1, 0: 3}, 4)
    g = FourierExpansion(1, {2: 1}, 6)
    h = f * g
    assert h.trunc == 5
    assert h.coefficient(1) == 1
    assert h.coefficient(2) == 3


def test_powers_and_negative_powers():
    f = FourierExpansion.from_list([1, 1, 0, 0, 0, 0, 0, 0])
    cube = f ** 3
    assert [cube.coefficient(n) for n in range(5)] == [1, 3, 3, 1, 0]
    assert (f ** -2 * f ** 2).agrees_with(FourierExpansion.constant(1, 1, 8))


def test_regrid_and_unify():
    f = FourierExpansion(2, {1: 1}, 6)
    g = FourierExpansion(3, {1: 1}, 6)
    a, b = unify(f, g)
    assert a.grid == b.grid == 6
    assert a.coefficient_at(Fraction(1, 2)) == 1
    assert b.coefficient_at(Fraction(1, 3)) == 1
    with pytest.raises(DomainError):
        f.regrid(3)


def test_normalized_finds_coarsest_grid():
    f = FourierExpansion(4, {2: 1, 6: -1}, 12)
    g = f.normalized()
    assert g.grid == 2
    assert g.coefficient_at(Fraction(1, 2)) == 1
    assert g.coefficient_at(Fraction(3, 2)) == -1


def test_differentiate_on_fractional_grid():
    f = FourierExpansion(2, {1: 4, 3: 2}, 5)
    assert f.differentiate().coeffs == {1: 2, 3: 3}


def test_rescale():
    f = FourierExpansion.from_list([1, 2, 3])
    g = f.rescale(2)
    assert g.trunc == 6
    assert g.coeffs == {0: 1, 2: 2, 4: 3}


def test_bol_image_kills_constants_and_scales_terms():
    g = FourierExpansion(1, {-1: 1, 0: 5, 2: 1}, 4)
    image = bol_image(g, 4)
    assert image.coeffs == {-1: -1, 2: 8}
    with pytest.raises(DomainError):
        bol_image(g, 1)


def test_quadratic_coefficients_survive_arithmetic():
    root = QuadScalar.sqrt(-3)
    f = FourierExpansion(1, {0: 1, 1: root}, 3)
    square = f * f
    assert square.coefficient(2) == -3
    assert square.coefficient(1) == QuadScalar(0, 2, -3)


def test_json_round_trip_keeps_quadratic_values():
    f = FourierExpansion(2, {-1: Fraction(1, 3), 3: QuadScalar(1, 2, 5)}, 7)
    assert FourierExpansion.from_json(f.to_json()) == f


def test_text_form():
    f = FourierExpansion(1, {-1: 1, 1: -2}, 2)
    assert f.to_text() == "q^-1 - 2*q + O(q^2)"
