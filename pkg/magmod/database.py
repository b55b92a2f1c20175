"""Lightweight database support for magmod: an expansion cache and a run log."""
from __future__ import annotations

import json
import sqlite3
from contextlib import contextmanager
from pathlib import Path
from typing import Iterable, Iterator, Optional

from .qseries import FourierExpansion


SCHEMA = """
CREATE TABLE IF NOT EXISTS expansions (
    name TEXT NOT NULL,
    catalog_digest TEXT NOT NULL,
    "order" INTEGER NOT NULL,
    payload TEXT NOT NULL,
    created_at DATETIME DEFAULT CURRENT_TIMESTAMP,
    PRIMARY KEY (name, catalog_digest)
);

CREATE TABLE IF NOT EXISTS run_log (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    timestamp DATETIME DEFAULT CURRENT_TIMESTAMP,
    command TEXT NOT NULL,
    inputs TEXT,
    payload TEXT
);
"""


class DatabaseManager:
    """Thin wrapper around sqlite3 used as the catalog's expansion store."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._connection = sqlite3.connect(self.path)
        self._connection.execute("PRAGMA journal_mode=WAL")
        self._connection.executescript(SCHEMA)
        self._connection.commit()

    @contextmanager
    def cursor(self) -> Iterator[sqlite3.Cursor]:
        cursor = self._connection.cursor()
        try:
            yield cursor
            self._connection.commit()
        finally:
            cursor.close()

    def load_expansion(self, name: str, digest: str, order: int) -> Optional[FourierExpansion]:
        """A cached expansion with at least ``order`` known, or None."""

        with self.cursor() as cur:
            cur.execute(
                'SELECT "order", payload FROM expansions WHERE name = ? AND catalog_digest = ?',
                (name, digest),
            )
            row = cur.fetchone()
        if row is None or row[0] < order:
            return None
        return FourierExpansion.from_json(json.loads(row[1]))

    def save_expansion(self, name: str, digest: str, order: int, expansion: FourierExpansion) -> None:
        with self.cursor() as cur:
            cur.execute(
                'SELECT "order" FROM expansions WHERE name = ? AND catalog_digest = ?',
                (name, digest),
            )
            row = cur.fetchone()
            if row is not None and row[0] >= order:
                return
            cur.execute(
                'INSERT OR REPLACE INTO expansions (name, catalog_digest, "order", payload) VALUES (?, ?, ?, ?)',
                (name, digest, order, json.dumps(expansion.to_json())),
            )

    def log_run(self, command: str, inputs: Optional[dict] = None, payload: Optional[dict] = None) -> int:
        with self.cursor() as cur:
            cur.execute(
                "INSERT INTO run_log (command, inputs, payload) VALUES (?, ?, ?)",
                (
                    command,
                    json.dumps(inputs, sort_keys=True) if inputs is not None else None,
                    json.dumps(payload, sort_keys=True) if payload is not None else None,
                ),
            )
            return int(cur.lastrowid)

    def fetch_runs(self, command: Optional[str] = None) -> Iterable[tuple]:
        query = "SELECT id, timestamp, command, inputs, payload FROM run_log"
        params: tuple = ()
        if command is not None:
            query += " WHERE command = ?"
            params = (command,)
        with self.cursor() as cur:
            cur.execute(query + " ORDER BY id", params)
            yield from cur.fetchall()

    def close(self) -> None:
        self._connection.close()
