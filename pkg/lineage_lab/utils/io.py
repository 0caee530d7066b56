"""
Report files: long-format CSV tables and JSON summaries.

Output bytes depend only on the rows written, so runs with the same config and
seed produce identical files.
"""

import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Union

from .sentinel import format_extended, is_infinite

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _cell(value: Any) -> Any:
    if is_infinite(value) or isinstance(value, float):
        return format_extended(value)
    return value


def write_csv(path: PathLike, fieldnames: Sequence[str], rows: Iterable[Dict[str, Any]]) -> Path:
    """Write rows with a header; floats and sentinels are rendered with format_extended."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=list(fieldnames), extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({key: _cell(value) for key, value in row.items()})
            count += 1
    logger.debug(f"Wrote {count} rows to {path}")
    return path


def read_csv(path: PathLike) -> List[Dict[str, str]]:
    """Read a CSV file written by write_csv into a list of string-valued rows."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"CSV file not found: {path}")
    with path.open("r", newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def _json_default(value: Any) -> Any:
    if is_infinite(value):
        return str(value)
    if hasattr(value, "tolist"):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def write_json(path: PathLike, payload: Any) -> Path:
    """Write a JSON document with sorted keys and a trailing newline."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False, default=_json_default)
    path.write_text(text + "\n", encoding="utf-8")
    return path
