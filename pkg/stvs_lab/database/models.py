"""
Run registry schema.

Every dataset, checkpoint and report the command line produces is recorded
with its path, content hash, seed, topology and software version.
"""
from typing import List

DB_SCHEMA = {
    "tables": {
        # Generated datasets
        "datasets": {
            "schema": """
            CREATE TABLE IF NOT EXISTS datasets (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                path TEXT NOT NULL,
                content_hash TEXT NOT NULL,
                topology_id TEXT,
                seed INTEGER,
                sample_count INTEGER,
                stable_count INTEGER,
                unstable_count INTEGER,
                collapsed_count INTEGER,
                window_length REAL,
                spec_json TEXT,
                version TEXT,
                created_at TEXT DEFAULT CURRENT_TIMESTAMP
            );
            """
        },

        # Trained models
        "checkpoints": {
            "schema": """
            CREATE TABLE IF NOT EXISTS checkpoints (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                path TEXT NOT NULL,
                dataset_hash TEXT,
                seed INTEGER,
                parent_path TEXT,
                topology_id TEXT,
                train_config_json TEXT,
                metrics_json TEXT,
                version TEXT,
                created_at TEXT DEFAULT CURRENT_TIMESTAMP
            );
            """
        },

        # Evaluation, ablation and transfer reports
        "reports": {
            "schema": """
            CREATE TABLE IF NOT EXISTS reports (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                kind TEXT NOT NULL,
                path TEXT NOT NULL,
                model_path TEXT,
                dataset_hash TEXT,
                seed INTEGER,
                accuracy REAL,
                metrics_json TEXT,
                version TEXT,
                created_at TEXT DEFAULT CURRENT_TIMESTAMP
            );
            """
        },
    },

    "indexes": {
        "datasets": [
            "CREATE INDEX IF NOT EXISTS idx_datasets_hash ON datasets(content_hash);",
            "CREATE INDEX IF NOT EXISTS idx_datasets_topology ON datasets(topology_id);",
        ],
        "checkpoints": [
            "CREATE INDEX IF NOT EXISTS idx_checkpoints_dataset ON checkpoints(dataset_hash);",
        ],
        "reports": [
            "CREATE INDEX IF NOT EXISTS idx_reports_kind ON reports(kind);",
        ],
    },
}


def get_table_schema(table_name: str) -> str:
    """
    Get the SQL schema definition for a specific table.

    Args:
        table_name: Name of the table

    Returns:
        SQL schema definition

    Raises:
        ValueError: If table_name is not found in the schema
    """
    if table_name in DB_SCHEMA["tables"]:
        return DB_SCHEMA["tables"][table_name]["schema"]

    raise ValueError(f"Table '{table_name}' not found in schema")


def get_table_names() -> List[str]:
    """List of all table names in the schema."""
    return list(DB_SCHEMA["tables"].keys())

