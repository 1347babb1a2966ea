"""Deterministic number formatting for CLI and file output.

All floats are emitted as decimals with 12 significant digits, no locale
formatting, so repeated runs with the same configuration produce
byte-identical output.
"""

from __future__ import annotations

import json
import math


def fmt12(x: float) -> str:
    if x != x or math.isinf(x):
        return ""
    return f"{x:.12g}"


def round12(x: float) -> float:
    return float(f"{x:.12g}")


def json_ready(obj):
    """Recursively round floats to 12 significant digits."""
    if isinstance(obj, float):
        return round12(obj)
    if isinstance(obj, dict):
        return {k: json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_ready(v) for v in obj]
    return obj


def dumps(obj) -> str:
    return json.dumps(json_ready(obj), indent=2)
