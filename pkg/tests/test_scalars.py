from __future__ import annotations

import math
from fractions import Fraction

import mpmath
import pytest

from magmod.scalars import (
    DomainError,
    PrecisionError,
    QuadScalar,
    clean,
    format_scalar,
    padic_valuation,
    parse_scalar,
    quad_reconstruct,
    rational_reconstruct,
    reciprocal,
    squarefree_part,
    stable_reconstruct,
)


def test_clean_prefers_int():
    assert clean(Fraction(4, 2)) == 2
    assert isinstance(clean(Fraction(4, 2)), int)
    assert clean(QuadScalar(Fraction(3, 2))) == Fraction(3, 2)


def test_quad_scalar_normalizes_radicand():
    assert QuadScalar(0, 1, -12) == QuadScalar(0, 2, -3)
    assert QuadScalar(0, 1, 4) == 2
    assert QuadScalar(5, 0, -7).d == 1


def test_quad_scalar_arithmetic():
    i = QuadScalar.sqrt(-1)
    assert i * i == -1
    w = QuadScalar(Fraction(-1, 2), Fraction(1, 2), -3)
    assert w * w * w == 1
    assert QuadScalar(1, 1, 2) * QuadScalar(1, -1, 2) == -1
    assert QuadScalar(1, 1, 2).reciprocal() == QuadScalar(-1, 1, 2)


def test_mixing_fields_is_an_error():
    with pytest.raises(DomainError):
        QuadScalar.sqrt(2) + QuadScalar.sqrt(3)


def test_reciprocal_of_zero():
    with pytest.raises(DomainError):
        reciprocal(0)


def test_squarefree_part_keeps_sign():
    assert squarefree_part(-12) == -3
    assert squarefree_part(72) == 2
    assert squarefree_part(-1) == -1
    with pytest.raises(DomainError):
        squarefree_part(0)


def test_padic_valuation():
    assert padic_valuation(Fraction(24, 5), 2) == 3
    assert padic_valuation(Fraction(24, 5), 5) == -1
    assert padic_valuation(0, 3) == math.inf
    with pytest.raises(DomainError):
        padic_valuation(10, 4)


@pytest.mark.parametrize("value", [Fraction(-3, 2), 7, QuadScalar(Fraction(1, 4), Fraction(-1, 8), -3)])
def test_format_and_parse(value):
    assert parse_scalar(format_scalar(value)) == value


def test_parse_rejects_garbage():
    with pytest.raises(DomainError):
        parse_scalar("one half")


def test_rational_reconstruct():
    with mpmath.workprec(128):
        assert rational_reconstruct(mpmath.mpf(-355) / 113, 1000) == Fraction(-355, 113)
        assert rational_reconstruct(mpmath.pi, 1000) is None
        assert rational_reconstruct(mpmath.mpc(1, 1) / 3) is None


def test_quad_reconstruct_with_scale():
    with mpmath.workprec(128):
        scale = (2j * mpmath.pi) ** 2
        x = scale * mpmath.sqrt(-3) * mpmath.mpf(1) / 576
        assert quad_reconstruct(x, -3, scale) == QuadScalar(0, Fraction(1, 576), -3)
        assert quad_reconstruct(scale * mpmath.mpf(5) / 7, 1, scale) == Fraction(5, 7)


def test_stable_reconstruct_needs_two_agreeing_rungs():
    calls = []

    def compute(bits):
        calls.append(bits)
        return mpmath.mpf(1) / 3

    exact, _, bits = stable_reconstruct(compute, lambda x: rational_reconstruct(x, 100), [64, 96, 128])
    assert exact == Fraction(1, 3)
    assert bits == 96
    assert calls == [64, 96]


def test_stable_reconstruct_reports_failure():
    with pytest.raises(PrecisionError):
        stable_reconstruct(lambda bits: mpmath.pi, lambda x: rational_reconstruct(x, 100), [64, 96])
