from __future__ import annotations

from fractions import Fraction
from types import SimpleNamespace

import pytest

from magmod.groups import S, T
from magmod.operators import OrbitImage, ScaledShift, SlashEngine
from magmod.reproduce import TableOutcome, orbit_image_matches, run_tables, table_ids
from magmod.scalars import DomainError


@pytest.fixture
def context(catalog, config, ctx):
    return SimpleNamespace(catalog=catalog, config=config, ctx=ctx)


def test_table_ids():
    assert table_ids() == ["2", "3.1", "3.2", "3.3", "C.1.1", "C.1.2", "C.2.1", "C.2.2",
                           "4", "C.3.1", "C.3.2", "C.3.3", "C.4.1", "C.4.2", "C.4.3", "5", "6"]


def test_unknown_table(context):
    with pytest.raises(DomainError):
        run_tables("7", context)


def test_outcome_records_failures():
    outcome = TableOutcome("x")
    outcome.check("first", True)
    outcome.check("second", False, "off by one")
    assert not outcome.passed
    assert outcome.lines == ["ok   first", "FAIL second: off by one"]


def test_expansion_and_hecke_tables(context):
    outcomes = run_tables("2", context) + run_tables("3.2", context)
    assert all(o.passed for o in outcomes), [o.lines for o in outcomes]


def test_unrecognized_orbit_images_fail(catalog, config):
    engine = SlashEngine(catalog, config)
    assert not orbit_image_matches(OrbitImage(S, None, None), engine)
    assert not orbit_image_matches(OrbitImage(S, None, ScaledShift(Fraction(1, 2), Fraction(2), Fraction(0))), engine)
    assert orbit_image_matches(OrbitImage(S, None, ScaledShift(Fraction(-1, 4), Fraction(2), Fraction(1, 2))), engine)


def test_exact_orbit_images_must_be_phi(catalog, config):
    engine = SlashEngine(catalog, config)
    phi = catalog.expansion("phi", 12)
    assert orbit_image_matches(OrbitImage(T, phi, None), engine)
    assert orbit_image_matches(OrbitImage(T, phi.scale(-1), None), engine)
    assert not orbit_image_matches(OrbitImage(T, phi.scale(3), None), engine)
    assert not orbit_image_matches(OrbitImage(T, catalog.expansion("phitilde", 12), None), engine)


@pytest.mark.slow
@pytest.mark.parametrize("table", ["4", "C.3.1", "C.3.2", "C.3.3"])
def test_residue_tables(context, table):
    (outcome,) = run_tables(table, context)
    assert outcome.passed, outcome.lines


@pytest.mark.slow
@pytest.mark.parametrize("table", ["C.4.1", "C.4.2", "C.4.3", "5", "6"])
def test_period_tables(context, table):
    (outcome,) = run_tables(table, context)
    assert outcome.passed, outcome.lines


@pytest.mark.slow
@pytest.mark.parametrize("table", ["3.1", "3.3", "C.1.1", "C.1.2", "C.2.1", "C.2.2"])
def test_operator_tables(context, table):
    (outcome,) = run_tables(table, context)
    assert outcome.passed, outcome.lines
