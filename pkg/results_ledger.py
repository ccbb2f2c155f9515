"""
--------------------------------------------------------------------------------
SYSTEM ROLE:
Results Ledger.
Appends every emitted ResultRecord to a local SQLite file so that runs can be
compared later (see results_dashboard.py).

CONFIGURATION:
- Path: NMK_RESULTS_DB (default results/nmk_results.db).
- The file is opened in WAL journal mode so the dashboard can read while a
  long table run is still writing.
--------------------------------------------------------------------------------
"""

import json
import logging
import os
import sqlite3
from datetime import datetime, timezone
from typing import Iterable, Optional

import pandas as pd
from dotenv import find_dotenv, load_dotenv

load_dotenv(find_dotenv())

DEFAULT_DB_PATH = os.path.join("results", "nmk_results.db")

SCHEMA = """
    CREATE TABLE IF NOT EXISTS results (
        id INTEGER PRIMARY KEY AUTOINCREMENT,
        created_at TEXT NOT NULL,
        command TEXT NOT NULL,
        label TEXT,
        channel TEXT NOT NULL,
        env TEXT NOT NULL,
        measure TEXT NOT NULL,
        n_qubits INTEGER NOT NULL,
        value REAL NOT NULL,
        target REAL,
        tolerance REAL,
        flag TEXT,
        config_hash TEXT NOT NULL,
        seed INTEGER,
        wall_time_s REAL,
        record_json TEXT NOT NULL
    )
"""


def default_db_path() -> str:
    return os.getenv("NMK_RESULTS_DB") or DEFAULT_DB_PATH


class ResultsLedger:
    def __init__(self, db_path: Optional[str] = None):
        self.db_path = db_path or default_db_path()
        directory = os.path.dirname(os.path.abspath(self.db_path))
        os.makedirs(directory, exist_ok=True)
        with self._connect() as conn:
            mode = conn.execute("PRAGMA journal_mode=WAL;").fetchone()[0]
            conn.execute(SCHEMA)
        if str(mode).upper() != "WAL":
            logging.warning(f"[ledger] ⚠️ journal mode is {mode}, expected WAL")

    def _connect(self) -> sqlite3.Connection:
        return sqlite3.connect(self.db_path, timeout=30)

    def record(self, command: str, records: Iterable) -> int:
        """Append ResultRecords; returns the number of rows written."""
        created_at = datetime.now(timezone.utc).isoformat(timespec="seconds")
        rows = []
        for rec in records:
            rows.append((created_at, command, rec.label, rec.channel, rec.env, rec.measure, rec.n_qubits,
                         float(rec.value), rec.target, rec.tolerance, rec.flag, rec.config_hash, rec.seed,
                         rec.wall_time_s, json.dumps(rec.to_dict(), sort_keys=True)))
        if not rows:
            return 0
        with self._connect() as conn:
            conn.executemany(
                "INSERT INTO results (created_at, command, label, channel, env, measure, n_qubits, value, "
                "target, tolerance, flag, config_hash, seed, wall_time_s, record_json) "
                "VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)", rows)
        logging.info(f"[ledger] ✅ {len(rows)} record(s) from '{command}' -> {self.db_path}")
        return len(rows)

    def frame(self) -> pd.DataFrame:
        with self._connect() as conn:
            return pd.read_sql_query("SELECT * FROM results ORDER BY id ASC", conn)

    def latest(self, label: Optional[str] = None) -> pd.DataFrame:
        """Newest row per (label, channel, env, measure, n_qubits)."""
        df = self.frame()
        if label is not None:
            df = df[df["label"] == label]
        if df.empty:
            return df
        keys = ["label", "channel", "env", "measure", "n_qubits"]
        return df.sort_values("id").groupby(keys, as_index=False, dropna=False).tail(1).reset_index(drop=True)

    def reset(self) -> int:
        """Delete every row; returns how many were removed."""
        conn = self._connect()
        try:
            count = conn.execute("SELECT COUNT(*) FROM results").fetchone()[0]
            conn.execute("DELETE FROM results")
            conn.commit()
            conn.isolation_level = None
            conn.execute("VACUUM")
        finally:
            conn.close()
        logging.info(f"[ledger] 🗑️ cleared {count} row(s)")
        return count
