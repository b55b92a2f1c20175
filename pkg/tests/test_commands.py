from __future__ import annotations

import json

import pytest

from magmod.__main__ import main
from magmod.commands import parse_gamma, parse_tau, registry
from magmod.database import DatabaseManager
from magmod.groups import GroupElement
from magmod.scalars import DomainError


def run(capsys, tmp_config, *argv):
    code = main([*argv, "--config", str(tmp_config)])
    return code, capsys.readouterr().out


def test_every_subcommand_has_a_handler():
    assert registry.names == sorted([
        "al", "coset-orbit", "eval", "expand", "frs", "hecke", "list", "magnetic",
        "magnetic-period-test", "periods", "reproduce", "residues", "search", "slash",
    ])


def test_list(capsys, tmp_config):
    code, out = run(capsys, tmp_config, "list")
    assert code == 0
    assert any(line.startswith("E4j ") for line in out.splitlines())


def test_expand_json(capsys, tmp_config):
    code, out = run(capsys, tmp_config, "expand", "E4j", "--order", "3", "--json")
    assert code == 0
    report = json.loads(out)
    assert report["command"] == "expand"
    assert report["precision"] == [128]
    assert report["outputs"]["text"] == "q - 504*q^2 + 180252*q^3 + O(q^4)"


def test_usage_errors_exit_with_two(capsys, tmp_config):
    assert run(capsys, tmp_config, "expand", "psi")[0] == 2
    assert run(capsys, tmp_config, "eval", "E4j", "0,-1")[0] == 2
    assert run(capsys, tmp_config, "reproduce", "9.9")[0] == 2
    assert main(["frobnicate"]) == 2


def test_magnetic_at_a_fixed_depth(capsys, tmp_config):
    code, out = run(capsys, tmp_config, "magnetic", "E4j", "--depth", "1", "--nmax", "60")
    assert code == 0
    assert "E4j: depth 1 up to n = 60: consistent (D = 1)" in out


def test_hecke(capsys, tmp_config):
    code, out = run(capsys, tmp_config, "hecke", "E4j", "2", "--order", "2")
    assert code == 0
    assert out.startswith("T_2 E4j = ")


def test_runs_are_logged(capsys, tmp_config, tmp_path):
    run(capsys, tmp_config, "expand", "phi", "--order", "4")
    store = DatabaseManager(tmp_path / "magmod.db")
    try:
        assert [row[2] for row in store.fetch_runs()] == ["expand"]
    finally:
        store.close()


def test_no_cache_leaves_no_database(capsys, tmp_config, tmp_path):
    assert run(capsys, tmp_config, "list", "--no-cache")[0] == 0
    assert not (tmp_path / "magmod.db").exists()


def test_reproduce_expansion_table(capsys, tmp_config):
    code, out = run(capsys, tmp_config, "reproduce", "2")
    assert code == 0
    assert out.splitlines()[0] == "2: PASS"


def test_argument_parsers():
    assert parse_gamma("1,1,0,1") == GroupElement(1, 1, 0, 1)
    assert parse_tau("1/2, 3/2").imag == 1.5
    with pytest.raises(DomainError):
        parse_tau("0.5")
    with pytest.raises(DomainError):
        parse_gamma("1,2")
