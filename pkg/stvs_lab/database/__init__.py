"""
Run registry for STVS Lab.
"""

from stvs_lab.database.db_manager import (
    setup_database,
    create_connection,
    get_db_connection,
    fetch_all,
    fetch_one,
    get_tables,
    get_row_count,
    record_dataset,
    record_checkpoint,
    record_report,
)

from stvs_lab.database.models import get_table_schema, get_table_names

__all__ = [
    'setup_database',
    'create_connection',
    'get_db_connection',
    'fetch_all',
    'fetch_one',
    'get_tables',
    'get_row_count',
    'record_dataset',
    'record_checkpoint',
    'record_report',
    'get_table_schema',
    'get_table_names',
]
