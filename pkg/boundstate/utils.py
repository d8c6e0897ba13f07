"""Utility functions for writing deterministic result files."""

import csv
import json
import logging
import math
from pathlib import Path

import numpy as np

from boundstate import app_settings

logger = logging.getLogger(__name__)


def format_number(value, digits: int | None = None) -> str:
    """
    Format a real number with a fixed number of significant digits.

    Args:
        value: Number to format; None becomes an empty string
        digits: Significant digits (default from settings)

    Returns:
        Formatted string, identical for identical inputs

    Examples:
        >>> format_number(1 / 3)
        "0.333333333333"
        >>> format_number(-0.0)
        "0"
    """
    if value is None:
        return ""
    digits = digits or app_settings.BOUNDSTATE_SIGNIFICANT_DIGITS
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if value == 0:
        return "0"
    return f"{value:.{digits}g}"


def rounded(data, digits: int | None = None):
    """
    Recursively round floats to a fixed number of significant digits for JSON output.

    Complex numbers become [re, im] pairs, numpy scalars and arrays become plain
    Python values and non-finite floats become None.
    """
    digits = digits or app_settings.BOUNDSTATE_SIGNIFICANT_DIGITS
    if isinstance(data, dict):
        return {str(k): rounded(v, digits) for k, v in data.items()}
    if isinstance(data, (list, tuple)):
        return [rounded(v, digits) for v in data]
    if isinstance(data, np.ndarray):
        return rounded(data.tolist(), digits)
    if isinstance(data, (bool, np.bool_)):
        return bool(data)
    if isinstance(data, (int, np.integer)):
        return int(data)
    if isinstance(data, (complex, np.complexfloating)):
        return [rounded(data.real, digits), rounded(data.imag, digits)]
    if isinstance(data, (float, np.floating)):
        if not math.isfinite(data):
            return None
        return float(format_number(data, digits))
    return data


def write_json(path: Path, data) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(rounded(data), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info("Wrote %s", path)
    return path


def write_table(path: Path, header: list[str], columns: list[np.ndarray]) -> Path:
    """Whitespace-delimited table with a '#' header line, one row per sample"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["# " + " ".join(header)]
    for row in zip(*columns):
        lines.append(" ".join(format_number(x) for x in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.info("Wrote %d rows to %s", len(lines) - 1, path)
    return path


def write_csv(path: Path, header: list[str], rows: list[list]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_number(x) if isinstance(x, float) else x for x in row])
    logger.info("Wrote %d rows to %s", len(rows), path)
    return path


def write_frame(path: Path, frame) -> Path:
    """
    Wigner frame as text: a header line with the time and grid, then the ny x nx matrix.

    Args:
        path: Destination file
        frame: A ``WignerFrame``
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    grid = " ".join(format_number(x) if isinstance(x, float) else str(x) for x in frame.grid.as_tuple())
    lines = [f"# t={format_number(frame.time)} grid={grid}"]
    for row in frame.values:
        lines.append(" ".join(format_number(x) for x in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path

