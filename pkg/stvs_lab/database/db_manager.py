"""
Run registry management.

Connection handling, query helpers and schema setup for the SQLite file that
records datasets, checkpoints and reports.
"""

import os
import json
import sqlite3
import logging
from collections import namedtuple
from contextlib import contextmanager
from typing import Any, Dict, List, Optional, Tuple

from stvs_lab.config import DB_PATH
from stvs_lab.database.models import DB_SCHEMA
from stvs_lab.utils.io import version_string

logger = logging.getLogger(__name__)


def create_connection(db_path: Optional[str] = None) -> sqlite3.Connection:
    """
    Open the registry, creating its directory on first use.

    Args:
        db_path: Registry file (default: DB_PATH)

    Returns:
        Database connection object
    """
    db_path = db_path or DB_PATH
    directory = os.path.dirname(db_path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    try:
        return sqlite3.connect(db_path)
    except sqlite3.Error as e:
        logger.error(f"Cannot open registry {db_path}: {e}")
        raise


@contextmanager
def get_db_connection(db_path: Optional[str] = None):
    """Registry connection that is closed on exit."""
    conn = create_connection(db_path)
    try:
        yield conn
    finally:
        conn.close()


def _execute(conn: sqlite3.Connection, query: str, params: Optional[Tuple] = None) -> sqlite3.Cursor:
    cursor = conn.cursor()
    try:
        cursor.execute(query, params or ())
    except sqlite3.Error as e:
        logger.error(f"Registry query failed: {e}")
        logger.debug(f"Query: {query}")
        raise
    return cursor


def fetch_all(conn: sqlite3.Connection, query: str, params: Optional[Tuple] = None) -> List[Tuple]:
    """Run a query and return every row as a named tuple keyed by column."""
    cursor = _execute(conn, query, params)
    Row = namedtuple("Row", [column[0] for column in cursor.description])
    return [Row(*row) for row in cursor.fetchall()]


def fetch_one(conn: sqlite3.Connection, query: str, params: Optional[Tuple] = None) -> Optional[Tuple]:
    """First row of a query, or None."""
    return _execute(conn, query, params).fetchone()


def create_table(conn: sqlite3.Connection, table_name: str, schema: str) -> None:
    """Run a CREATE TABLE IF NOT EXISTS statement and commit."""
    try:
        _execute(conn, schema)
        conn.commit()
    except sqlite3.Error:
        conn.rollback()
        raise
    logger.debug(f"Table {table_name} ready")


def setup_database(db_path: Optional[str] = None) -> None:
    """
    Create every registry table and index. Safe to call repeatedly.

    Args:
        db_path: Registry file (default: DB_PATH)
    """
    conn = create_connection(db_path)
    try:
        for table_name, table_info in DB_SCHEMA["tables"].items():
            create_table(conn, table_name, table_info["schema"])
        cursor = conn.cursor()
        for statements in DB_SCHEMA["indexes"].values():
            for statement in statements:
                cursor.execute(statement)
        conn.commit()
    finally:
        conn.close()


def get_tables(conn: sqlite3.Connection) -> List[str]:
    """Names of the user tables in the registry."""
    rows = _execute(conn, "SELECT name FROM sqlite_master WHERE type='table' AND name NOT LIKE 'sqlite_%'")
    return [row[0] for row in rows.fetchall()]


def get_row_count(conn: sqlite3.Connection, table_name: str) -> int:
    """
    Number of rows in a registry table.

    Raises:
        ValueError: If the table does not exist
    """
    if table_name not in get_tables(conn):
        raise ValueError(f"Table '{table_name}' does not exist")
    return _execute(conn, f"SELECT COUNT(*) FROM {table_name}").fetchone()[0]


def _insert(table: str, record: Dict[str, Any], db_path: Optional[str]) -> int:
    setup_database(db_path)
    columns = list(record)
    query = f"INSERT INTO {table} ({', '.join(columns)}) VALUES ({', '.join('?' for _ in columns)})"
    with get_db_connection(db_path) as conn:
        cursor = conn.cursor()
        try:
            cursor.execute(query, tuple(record[c] for c in columns))
            conn.commit()
        except sqlite3.Error as e:
            logger.error(f"Could not record {table} entry: {e}")
            conn.rollback()
            raise
        return cursor.lastrowid


def record_dataset(path: str, manifest: Dict[str, Any], db_path: Optional[str] = None) -> int:
    """Register a saved dataset from its manifest; returns the row id."""
    mix = manifest.get("class_mix", {})
    spec = manifest.get("spec", {})
    return _insert("datasets", {
        "path": os.path.abspath(path),
        "content_hash": manifest["content_hash"],
        "topology_id": manifest.get("topology_id"),
        "seed": spec.get("seed"),
        "sample_count": manifest.get("count"),
        "stable_count": mix.get("stable"),
        "unstable_count": mix.get("unstable"),
        "collapsed_count": mix.get("collapsed"),
        "window_length": spec.get("window"),
        "spec_json": json.dumps(spec, sort_keys=True),
        "version": manifest.get("version", version_string()),
    }, db_path)


def record_checkpoint(path: str, header: Dict[str, Any], db_path: Optional[str] = None) -> int:
    """Register a checkpoint from its header; returns the row id."""
    train_config = header.get("train_config", {})
    return _insert("checkpoints", {
        "path": os.path.abspath(path),
        "dataset_hash": header.get("dataset_hash"),
        "seed": train_config.get("seed"),
        "parent_path": header.get("parent"),
        "topology_id": header.get("topology_id"),
        "train_config_json": json.dumps(train_config, sort_keys=True),
        "metrics_json": json.dumps(header.get("metrics", {}), sort_keys=True),
        "version": header.get("software", version_string()),
    }, db_path)


def record_report(kind: str, path: str, metrics: Dict[str, Any], model_path: Optional[str] = None,
                  dataset_hash: Optional[str] = None, seed: Optional[int] = None,
                  accuracy: Optional[float] = None, db_path: Optional[str] = None) -> int:
    """Register an evaluation, ablation or transfer report; returns the row id."""
    return _insert("reports", {
        "kind": kind,
        "path": os.path.abspath(path),
        "model_path": os.path.abspath(model_path) if model_path else None,
        "dataset_hash": dataset_hash,
        "seed": seed,
        "accuracy": accuracy,
        "metrics_json": json.dumps(metrics, sort_keys=True, default=float),
        "version": version_string(),
    }, db_path)
