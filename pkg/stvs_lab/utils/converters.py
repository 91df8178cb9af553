"""
Data conversion utilities for STVS Lab.
"""
import re
import logging
from typing import Iterable, List, Optional, Tuple

logger = logging.getLogger(__name__)

LinePair = Tuple[int, int]

_LINE_RE = re.compile(r"^\s*(\d+)\s*[-:]\s*(\d+)\s*$")


def normalize_line(pair: Iterable[int]) -> LinePair:
    """
    Normalize a line identity to the ascending unordered bus pair.

    Args:
        pair: Two bus ids in any order

    Returns:
        Tuple (low, high)
    """
    a, b = (int(v) for v in pair)
    return (a, b) if a <= b else (b, a)


def parse_line_pair(text: str) -> LinePair:
    """
    Parse a line written as "2-3" (or "2:3").

    Args:
        text: Line string

    Returns:
        Normalized bus pair

    Raises:
        ValueError: If the text is not a bus pair
    """
    match = _LINE_RE.match(text)
    if not match:
        raise ValueError(f"invalid line '{text}', expected FROM-TO")
    return normalize_line((int(match.group(1)), int(match.group(2))))


def parse_line_list(text: Optional[str]) -> List[LinePair]:
    """
    Parse a comma-separated list of lines, e.g. "2-3,5-8".

    Args:
        text: Comma-separated line list (empty or None gives no lines)

    Returns:
        List of normalized bus pairs
    """
    if not text:
        return []
    return [parse_line_pair(part) for part in text.split(",") if part.strip()]


def format_line(pair: Iterable[int]) -> str:
    """Format a bus pair as "2-3"."""
    a, b = normalize_line(pair)
    return f"{a}-{b}"


def seconds_to_steps(seconds: float, dt: float) -> int:
    """
    Convert a duration to the nearest whole number of integration steps.

    Args:
        seconds: Duration in seconds
        dt: Step size in seconds

    Returns:
        Number of steps
    """
    return int(round(seconds / dt))
