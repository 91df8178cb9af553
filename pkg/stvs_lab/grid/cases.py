"""
Embedded grid cases shipped as package data.
"""
import os

CASE_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data")

# builtin name -> JSON document under data/
BUILTIN_GRIDS = {
    "ne39": os.path.join(CASE_DIR, "ne39.json"),
}
