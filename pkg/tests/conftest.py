"""Shared fixtures for the magmod test-suite."""
from __future__ import annotations

from pathlib import Path

import mpmath
import pytest

from magmod.catalog import Catalog, load_catalog
from magmod.config import Config, default_config
from magmod.evaluator import EvalContext


def pytest_configure(config: pytest.Config) -> None:
    config.addinivalue_line("markers", "slow: acceptance checks at full precision and coefficient range")


@pytest.fixture(scope="session")
def catalog() -> Catalog:
    return load_catalog()


@pytest.fixture(scope="session")
def config() -> Config:
    return default_config()


@pytest.fixture()
def ctx() -> EvalContext:
    return EvalContext(precision=128)


@pytest.fixture(autouse=True)
def _restore_mpmath_precision():
    prec = mpmath.mp.prec
    yield
    mpmath.mp.prec = prec


@pytest.fixture()
def tmp_config(tmp_path: Path) -> Path:
    path = tmp_path / "magmod_config.yaml"
    path.write_text(
        "precision:\n"
        "  bits: 128\n"
        "  ladder: [128, 192, 256]\n"
        "database:\n"
        f"  path: \"{(tmp_path / 'magmod.db').as_posix()}\"\n"
        "  enabled: true\n",
        encoding="utf-8",
    )
    return path
