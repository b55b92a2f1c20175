from __future__ import annotations

import json

import pytest

from magmod.database import DatabaseManager
from magmod.qseries import FourierExpansion


@pytest.fixture
def store(tmp_path):
    manager = DatabaseManager(tmp_path / "nested" / "magmod.db")
    yield manager
    manager.close()


def test_expansion_cache_keeps_the_longest_copy(store):
    short = FourierExpansion.from_list([1, 2, 3])
    longer = FourierExpansion.from_list([1, 2, 3, 4, 5])
    store.save_expansion("f", "abc", 4, longer)
    store.save_expansion("f", "abc", 2, short)
    assert store.load_expansion("f", "abc", 3) == longer
    assert store.load_expansion("f", "abc", 5) is None
    assert store.load_expansion("f", "other", 1) is None


def test_run_log(store):
    first = store.log_run("expand", {"name": "E4j"}, {"ok": True})
    second = store.log_run("list")
    assert second == first + 1
    rows = list(store.fetch_runs("expand"))
    assert len(rows) == 1
    assert json.loads(rows[0][3]) == {"name": "E4j"}
    assert [row[2] for row in store.fetch_runs()] == ["expand", "list"]
