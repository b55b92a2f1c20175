from __future__ import annotations

from fractions import Fraction
from pathlib import Path

import pytest

from magmod import config as config_module
from magmod.config import PACKAGED_CATALOG, ConfigError, default_config, load_config


def test_defaults():
    config = default_config()
    assert config.precision.bits == 256
    assert config.precision.ladder[0] == 256
    assert config.search.smooth_number == 302400
    assert config.slash.height_margin == Fraction(1, 2)
    assert config.periods.generators["SL2(Z)"] == [[0, 1, -1, 0], [1, 1, 0, 1]]


def test_load_from_file(tmp_config: Path, tmp_path: Path):
    config = load_config(tmp_config)
    assert config.precision.bits == 128
    assert config.precision.ladder == [128, 192, 256]
    assert config.database.path == tmp_path / "magmod.db"
    assert config.reconstruction.max_denominator == 10**6


def test_first_run_writes_the_default_file(tmp_path: Path, monkeypatch):
    target = tmp_path / "home" / "magmod_config.yaml"
    monkeypatch.setattr(config_module, "DEFAULT_CONFIG_PATH", target)
    config = load_config()
    assert target.exists()
    assert config.search.verify_nmax == 500


def test_missing_explicit_file(tmp_path: Path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.yaml")


@pytest.mark.parametrize(
    "text",
    [
        "precision:\n  bits: 32\n",
        "precision:\n  ladder: [256, 128]\n",
        "slash:\n  height_margin: half\n",
        "search:\n  colour: blue\n",
        "search:\n  verify_nmax: many\n",
        "search:\n  initial_constraints: 128\n  max_constraints: 64\n",
        "compute:\n  workers: \"4\"\n",
        "compute:\n  max_order: 0\n",
        "reconstruction:\n  max_denominator: 1.5\n",
        "reconstruction:\n  tolerance_bits: true\n",
        "slash:\n  terms: twelve\n",
        "periods:\n  generators:\n    Gamma1(6): [[1, 0, 2, 1]]\n",
        "- just\n- a list\n",
        "precision: [unclosed\n",
    ],
)
def test_invalid_files(tmp_path: Path, text: str):
    path = tmp_path / "bad.yaml"
    path.write_text(text, encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(path)


def test_integer_sections_are_read(tmp_path: Path):
    path = tmp_path / "sections.yaml"
    path.write_text(
        "reconstruction:\n  tolerance_bits: 40\n"
        "compute:\n  workers: 3\n"
        "search:\n  verify_nmax: 200\n",
        encoding="utf-8",
    )
    config = load_config(path)
    assert config.reconstruction.tolerance_bits == 40
    assert config.reconstruction.max_denominator == 10**6
    assert config.compute.workers == 3
    assert config.search.verify_nmax == 200
    assert config.search.max_constraints == 512


def test_catalog_path_precedence(tmp_path: Path, monkeypatch):
    config = default_config()
    monkeypatch.delenv("MAGMOD_CATALOG", raising=False)
    assert config.catalog_path() == PACKAGED_CATALOG
    monkeypatch.setenv("MAGMOD_CATALOG", str(tmp_path / "env.yaml"))
    assert config.catalog_path() == tmp_path / "env.yaml"
    assert config.catalog_path(tmp_path / "flag.yaml") == tmp_path / "flag.yaml"
