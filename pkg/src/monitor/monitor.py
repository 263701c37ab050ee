#!/usr/bin/env python3
"""
Monitor Component
Keeps a ledger of post-selection runs (one row per filter application) in SQLite
"""

import time
import logging
import sqlite3
from typing import Dict, Any, List, Optional
from pathlib import Path

import pandas as pd

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

LEDGER_COLUMNS = [
    'run_id', 'timestamp', 'stage', 'input_path', 'output_path', 'gain', 'alpha_c', 'seed',
    'n_in', 'n_accept', 'p_success', 'p_analytic', 'state_digest', 'error_message',
]


class LedgerStorage:
    """Stores ledger rows in a SQLite database"""

    def __init__(self, db_path: str = "ledger.db"):
        """
        Initialize ledger storage

        Args:
            db_path: Path to SQLite database file
        """
        self.db_path = str(db_path)
        Path(self.db_path).parent.mkdir(parents=True, exist_ok=True)
        self._init_database()

    def _connect(self) -> sqlite3.Connection:
        return sqlite3.connect(self.db_path)

    def _init_database(self):
        """Initialize database schema"""
        conn = self._connect()
        cursor = conn.cursor()

        cursor.execute('''
            CREATE TABLE IF NOT EXISTS runs (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                run_id TEXT,
                timestamp REAL,
                stage TEXT,
                input_path TEXT,
                output_path TEXT,
                gain REAL,
                alpha_c REAL,
                seed INTEGER,
                n_in INTEGER,
                n_accept INTEGER,
                p_success REAL,
                p_analytic REAL,
                state_digest TEXT,
                error_message TEXT
            )
        ''')

        cursor.execute('''
            CREATE INDEX IF NOT EXISTS idx_run_id
            ON runs(run_id)
        ''')

        conn.commit()
        conn.close()

        logger.debug(f"Ledger initialized at {self.db_path}")

    def store_rows(self, run_id: str, rows: List[Dict[str, Any]]):
        """
        Store ledger rows in a batch

        Args:
            run_id: Run identifier
            rows: Row dictionaries keyed by LEDGER_COLUMNS
        """
        columns = LEDGER_COLUMNS[1:]
        conn = self._connect()
        cursor = conn.cursor()

        for row in rows:
            values = [row.get(name) for name in columns]
            values[0] = row.get('timestamp', time.time())
            cursor.execute(
                f"INSERT INTO runs (run_id, {', '.join(columns)}) "
                f"VALUES ({', '.join('?' * (len(columns) + 1))})",
                [run_id] + values,
            )

        conn.commit()
        conn.close()

    def get_rows(self, run_id: Optional[str] = None) -> List[Dict[str, Any]]:
        """
        Retrieve ledger rows

        Args:
            run_id: Restrict to one run; all runs when None

        Returns:
            List of row dictionaries in insertion order
        """
        conn = self._connect()
        cursor = conn.cursor()
        query = f"SELECT {', '.join(LEDGER_COLUMNS)} FROM runs"
        params = ()
        if run_id is not None:
            query += " WHERE run_id = ?"
            params = (run_id,)
        cursor.execute(query + " ORDER BY id", params)
        rows = cursor.fetchall()
        conn.close()
        return [dict(zip(LEDGER_COLUMNS, row)) for row in rows]


class RunLedger:
    """Records filter applications of one run"""

    def __init__(self, run_id: str, storage_path: str = "ledger.db"):
        """
        Initialize ledger

        Args:
            run_id: Unique run identifier
            storage_path: Path to ledger database
        """
        self.run_id = run_id
        self.storage = LedgerStorage(storage_path)

    def record_filter(self, outcome, seed: Optional[int] = None,
                      input_path: Optional[str] = None, output_path: Optional[str] = None,
                      p_analytic: Optional[float] = None, state_digest: str = ''):
        """
        Record one successful filter application

        Args:
            outcome: FilterOutcome or finished StreamingFilter (spec and acceptance counts)
            seed: Filter seed
            input_path: Unfiltered record file
            output_path: Filtered record file
            p_analytic: Exact acceptance probability, when the source state is known
            state_digest: Digest of the source state
        """
        self.storage.store_rows(self.run_id, [{
            'stage': 'filter',
            'input_path': None if input_path is None else str(input_path),
            'output_path': None if output_path is None else str(output_path),
            'gain': outcome.spec.g,
            'alpha_c': outcome.spec.alpha_c,
            'seed': seed,
            'n_in': outcome.n_in,
            'n_accept': outcome.n_accept,
            'p_success': outcome.p_success,
            'p_analytic': p_analytic,
            'state_digest': state_digest,
        }])
        logger.debug(f"Ledger: g={outcome.spec.g:g} accepted {outcome.n_accept}/{outcome.n_in}")

    def record_failure(self, stage: str, error: Exception, gain: Optional[float] = None,
                       seed: Optional[int] = None, input_path: Optional[str] = None):
        self.storage.store_rows(self.run_id, [{
            'stage': stage,
            'input_path': None if input_path is None else str(input_path),
            'gain': gain,
            'seed': seed,
            'n_in': getattr(error, 'n_in', None),
            'p_success': getattr(error, 'p_success', None),
            'error_message': f"{type(error).__name__}: {error}",
        }])

    def get_data(self, run_id: Optional[str] = None) -> List[Dict[str, Any]]:
        """
        Get ledger rows

        Args:
            run_id: Optional specific run ID, defaults to current

        Returns:
            List of row dictionaries
        """
        return self.storage.get_rows(run_id or self.run_id)

    def to_frame(self, all_runs: bool = False) -> pd.DataFrame:
        rows = self.storage.get_rows(None if all_runs else self.run_id)
        return pd.DataFrame(rows, columns=LEDGER_COLUMNS)

    def export_csv(self, filepath: str, all_runs: bool = False) -> Path:
        """
        Export ledger rows to CSV

        Args:
            filepath: Path to export file
            all_runs: Include every run in the database
        """
        frame = self.to_frame(all_runs)
        path = Path(filepath)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False)
        logger.info(f"Exported {len(frame)} ledger rows to {path}")
        return path
