"""
This file contains the CSV and JSON writers for command results.
"""

import csv
import io
import sys
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, TextIO

import numpy as np
import orjson

ARTIFACT_VERSION = "0.1.0"


def canonical_json(data: Any) -> str:
    """
    Compact JSON with sorted keys, identical for identical inputs.

    :param data: Plain data (dicts, lists, numbers, strings, numpy scalars and arrays).
    :type data: Any

    :return: The JSON text.
    :rtype: str
    """
    return orjson.dumps(data, option=orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY).decode()


def format_cell(value: Any) -> str:
    """
    Render one cell: floats with 17 significant digits, booleans as 0/1.
    """
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


class ResultTable:
    """
    A CSV table whose first line records the config and artifact version.
    """

    def __init__(self, columns: Sequence[str], config: Dict[str, Any]) -> None:
        self.columns = list(columns)
        self.config = config
        self.rows: List[List[str]] = []

    def add(self, *values: Any) -> None:
        if len(values) != len(self.columns):
            raise ValueError(f"Expected {len(self.columns)} values, got {len(values)}.")
        self.rows.append([format_cell(v) for v in values])

    def extend(self, rows: Iterable[Sequence[Any]]) -> None:
        for row in rows:
            self.add(*row)

    def render(self) -> str:
        """
        :return: The full CSV text, metadata comment first.
        :rtype: str
        """
        buffer = io.StringIO()
        buffer.write(f"# config={canonical_json(self.config)} version={ARTIFACT_VERSION}\n")
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(self.columns)
        writer.writerows(self.rows)
        return buffer.getvalue()

    def write(self, out: Optional[Path], stream: Optional[TextIO] = None) -> None:
        """
        Write to ``out`` when given, otherwise to ``stream`` (standard output by default).
        """
        text = self.render()
        if out is None:
            (stream or sys.stdout).write(text)
        else:
            Path(out).write_text(text, encoding="utf-8", newline="")


def summary_path(out: Path) -> Path:
    return out.with_name(out.name + ".summary.json")


def write_summary(out: Optional[Path], summary: Dict[str, Any]) -> Optional[Path]:
    """
    Write the aggregate summary next to the CSV. Nothing is written without ``out``.

    :return: The path written, if any.
    :rtype: Optional[Path]
    """
    if out is None:
        return None
    path = summary_path(Path(out))
    path.write_bytes(
        orjson.dumps(
            summary,
            option=orjson.OPT_SORT_KEYS | orjson.OPT_INDENT_2 | orjson.OPT_SERIALIZE_NUMPY,
        )
    )
    return path
