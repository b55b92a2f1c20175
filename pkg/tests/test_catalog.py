from __future__ import annotations

from fractions import Fraction
from pathlib import Path

import pytest

from magmod.catalog import eisenstein_phi0, eta_expansion, load_catalog, parse_expr
from magmod.config import CatalogError, ComputeConfig
from magmod.database import DatabaseManager
from magmod.reproduce import HECKE_CLOSED_FORMS
from magmod.scalars import DomainError, ResourceError

DELTA = [0, 1, -24, 252, -1472, 4830, -6048]


def test_packaged_catalog_lists_the_named_forms(catalog):
    names = {e.name for e in catalog.entries()}
    assert {"phi", "phitilde", "E4j", "E6j", "F4", "F8a", "F8b", "C4", "H4a", "H6b"} <= names
    assert "Delta" not in names
    assert "Delta" in {e.name for e in catalog.entries(include_definitions=True)}


def test_unknown_name(catalog):
    with pytest.raises(DomainError):
        catalog.get("psi")


def test_delta_and_j(catalog):
    delta = catalog.expansion("Delta", 6)
    assert [delta.coefficient(n) for n in range(7)] == DELTA
    j = catalog.expansion("j", 2)
    assert [j.coefficient_at(e) for e in (-1, 0, 1, 2)] == [1, 744, 196884, 21493760]


def test_eisenstein_identity(catalog):
    lhs = catalog.expand_expr("(sub (pow E4 3) (pow E6 2))", 8)
    rhs = catalog.expand_expr("(mul 1728 Delta)", 8)
    assert lhs.agrees_with(rhs)
    assert lhs.trunc == 9


def test_lambda_lives_on_half_integers(catalog):
    lam = catalog.expansion("lambda", 2)
    assert lam.grid == 2
    assert lam.coefficient_at(Fraction(1, 2)) == 16
    assert lam.coefficient_at(1) == -128
    assert lam.coefficient_at(Fraction(3, 2)) == 704


def test_phi0_matches_the_lambert_series(catalog):
    assert catalog.expansion("phi0", 30).agrees_with(eisenstein_phi0(30))


def test_eta_uses_pentagonal_numbers():
    eta = eta_expansion(1, 6)
    assert eta.grid == 24
    assert eta.coefficient_at(Fraction(1, 24)) == 1
    assert eta.coefficient_at(Fraction(25, 24)) == -1
    assert eta.coefficient_at(Fraction(49, 24)) == -1
    assert eta.coefficient_at(Fraction(121, 24)) == 1


def test_hecke_node_matches_closed_form(catalog):
    image = catalog.expand_expr("(hecke E4j 2)", 6)
    closed = catalog.expand_expr("(mul -72 (add 30375 (mul 7 j)) (pow (sub 54000 j) -2) E4)", 6)
    assert image.agrees_with(closed)


@pytest.mark.slow
@pytest.mark.parametrize("name, n, closed", HECKE_CLOSED_FORMS)
def test_hecke_closed_forms_to_order_100(catalog, name, n, closed):
    image = catalog.expand_expr(f"(hecke {name} {n})", 100)
    assert image.agrees_with(catalog.expand_expr(closed, 100), 101)


@pytest.mark.slow
@pytest.mark.parametrize("full, half, factor", [("H4a", "H4b", 2), ("H6a", "H6b", 4)])
def test_h_forms_are_doubled_arguments(catalog, full, half, factor):
    doubled = catalog.expansion(half, 100).rescale(2).scale(factor)
    assert doubled.agrees_with(catalog.expansion(full, 200), 201)


def test_weights(catalog):
    assert catalog.weight_of(parse_expr("(mul E4 (inv j))")) == 4
    assert catalog.weight_of(parse_expr("(diff (pow eta 2))")) == 3
    assert catalog.weight_of(parse_expr("(pow theta3 -4)")) == -2


@pytest.mark.parametrize(
    "text",
    ["", "(add", "(pow E4)", "(E4 0)", ")", "(add 1 2) 3", "(frobnicate E4)", "(hecke (add E4 1) 2)", "E4 $"],
)
def test_malformed_expressions(text):
    with pytest.raises(CatalogError):
        parse_expr(text)


def test_expression_text_round_trip():
    expr = parse_expr("(mul -1 (pow (add 1 (pow t 2)) -2) f)")
    assert parse_expr(str(expr)) == expr
    assert expr.refs() == ("t", "f")


def _write_catalog(path: Path, body: str) -> Path:
    path.write_text(body, encoding="utf-8")
    return path


def test_reference_cycles_are_rejected(tmp_path):
    body = (
        "entries:\n"
        "  - {name: a, group: SL2(Z), weight: 0, level: 1, expr: (mul b 2)}\n"
        "  - {name: b, group: SL2(Z), weight: 0, level: 1, expr: (add a 1)}\n"
    )
    with pytest.raises(CatalogError):
        load_catalog(_write_catalog(tmp_path / "cycle.yaml", body))


@pytest.mark.parametrize(
    "block",
    [
        "{name: a, group: SL2(Z), weight: 4, level: 1}",
        "{name: a, group: Sp4(Z), weight: 4, level: 1, expr: E4}",
        "{name: a, group: SL2(Z), weight: 4, level: 1, expr: E4, poles: [{form: [1, 0, -1], order: 1}]}",
        "{name: a, group: SL2(Z), weight: 4, level: 1, expr: (mul E4 missing)}",
    ],
)
def test_bad_entries(tmp_path, block):
    with pytest.raises(CatalogError):
        load_catalog(_write_catalog(tmp_path / "bad.yaml", f"entries:\n  - {block}\n"))


def test_missing_catalog_file(tmp_path):
    with pytest.raises(CatalogError):
        load_catalog(tmp_path / "nowhere.yaml")


def test_order_budget():
    catalog = load_catalog(compute=ComputeConfig(max_order=10))
    with pytest.raises(ResourceError):
        catalog.expansion("Delta", 11)


def test_expansion_cache_is_used(tmp_path):
    store = DatabaseManager(tmp_path / "cache.db")
    try:
        first = load_catalog(store=store)
        expected = first.expansion("E4j", 20)
        second = load_catalog(store=store)
        assert second.expansion("E4j", 12) == expected.truncate(13)
        digest = second.digest("E4j")
        assert store.load_expansion("E4j", digest, 20) == expected
        assert store.load_expansion("E4j", digest, 21) is None
    finally:
        store.close()


def test_digest_tracks_resolved_text(catalog):
    assert catalog.digest("E4j") != catalog.digest("E6j")
    assert "{" in catalog.resolved_text("E4j")
