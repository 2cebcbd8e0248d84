"""
JSON / JSONL helpers backed by orjson.

orjson emits compact, deterministic bytes, which keeps re-runs byte-identical.
"""

from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Tuple, Union

import orjson

from .errors import ParseError

PathLike = Union[str, Path]


def dumps_line(record: Dict[str, Any]) -> bytes:
    return orjson.dumps(record, option=orjson.OPT_SORT_KEYS) + b"\n"


def write_jsonl(records: Iterable[Dict[str, Any]], path: PathLike) -> int:
    """Write records one per line; returns the number written."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "wb") as f:
        for record in records:
            f.write(dumps_line(record))
            count += 1
    return count


def iter_jsonl_lines(path: PathLike) -> Iterator[Tuple[int, Dict[str, Any]]]:
    """Yield (line_no, record) with physical line numbers, skipping blank lines."""
    path = Path(path)
    if not path.exists():
        raise ParseError("file not found", str(path))
    with open(path, "rb") as f:
        for line_no, raw in enumerate(f, start=1):
            if not raw.strip():
                continue
            try:
                record = orjson.loads(raw)
            except orjson.JSONDecodeError as e:
                raise ParseError(f"invalid JSON: {e}", str(path), line_no) from e
            if not isinstance(record, dict):
                raise ParseError("expected a JSON object per line", str(path), line_no)
            yield line_no, record


def iter_jsonl(path: PathLike) -> Iterator[Dict[str, Any]]:
    for _, record in iter_jsonl_lines(path):
        yield record


def read_jsonl(path: PathLike) -> List[Dict[str, Any]]:
    return list(iter_jsonl(path))


def write_json(data: Any, path: PathLike) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(orjson.dumps(data, option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS) + b"\n")


def read_json(path: PathLike) -> Any:
    path = Path(path)
    try:
        return orjson.loads(path.read_bytes())
    except orjson.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e}", str(path)) from e
