"""State-tracking datasets: tokens drawn uniformly from a group, targets are prefix products.

File layout (UTF-8, LF): one JSON header line, then one ``{"x": [...], "y": [...]}``
object per record.  Element labels live in the header only.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Iterator

from . import group_core as gc
from .errors import CorruptRecord, FormatVersionMismatch
from .group_core import FiniteGroup
from .sampling import STREAM_VERSION, token_stream

FORMAT_VERSION = "gtssm-ds/1"


@dataclass(frozen=True)
class DatasetHeader:
    group: str
    labels: tuple[str, ...]
    length: int
    count: int
    seed: int
    format: str = FORMAT_VERSION
    stream: str = STREAM_VERSION

    def to_json(self) -> str:
        doc = asdict(self)
        doc["labels"] = list(self.labels)
        return json.dumps(doc, ensure_ascii=False)


@dataclass(frozen=True)
class TaskRecord:
    x: tuple[int, ...]
    y: tuple[int, ...]

    def to_json(self) -> str:
        return json.dumps({"x": list(self.x), "y": list(self.y)}, separators=(",", ":"))


def make_record(G: FiniteGroup, x) -> TaskRecord:
    x = tuple(int(v) for v in x)
    return TaskRecord(x, tuple(gc.prefix_products(G, x)))


def gen_dataset(G: FiniteGroup, count: int, length: int, seed: int):
    """Header plus a lazy stream of records; record ``i`` depends only on (seed, i)."""
    if count < 1 or length < 1:
        raise ValueError("count and length must be at least 1")
    header = DatasetHeader(G.spec, G.element_labels, length, count, seed)

    def records() -> Iterator[TaskRecord]:
        for i in range(count):
            yield make_record(G, token_stream(seed, i, G.order, length))

    return header, records()


def write_dataset(path, header: DatasetHeader, records: Iterable[TaskRecord]) -> int:
    n = 0
    with Path(path).open("w", encoding="utf-8", newline="\n") as f:
        f.write(header.to_json() + "\n")
        for rec in records:
            f.write(rec.to_json() + "\n")
            n += 1
    if n != header.count:
        raise ValueError(f"header announces {header.count} records but {n} were written")
    return n


def _parse_header(line: str) -> DatasetHeader:
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as exc:
        raise CorruptRecord(1, f"header is not JSON ({exc.msg})") from None
    if not isinstance(doc, dict):
        raise CorruptRecord(1, "header must be a JSON object")
    if doc.get("format") != FORMAT_VERSION:
        raise FormatVersionMismatch(f"expected {FORMAT_VERSION}, got {doc.get('format')!r}")
    try:
        return DatasetHeader(
            group=doc["group"], labels=tuple(doc["labels"]), length=int(doc["length"]),
            count=int(doc["count"]), seed=int(doc["seed"]), format=doc["format"],
            stream=doc.get("stream", STREAM_VERSION),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptRecord(1, f"bad header field: {exc}") from None


def read_dataset(path, verify: bool = True) -> tuple[DatasetHeader, list[TaskRecord]]:
    """Load and re-check a dataset; every record must satisfy y = prefix_products(x)."""
    with Path(path).open("r", encoding="utf-8", newline="") as f:
        lines = f.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    elif lines:
        # final line lacks its newline: treat as truncated
        raise CorruptRecord(len(lines), "missing line terminator (truncated file?)")
    if not lines:
        raise CorruptRecord(1, "missing header")
    header = _parse_header(lines[0])
    G = gc.construct_group(header.group) if verify else None
    if G is not None and tuple(G.element_labels) != header.labels:
        raise CorruptRecord(1, "labels do not match the group's canonical indexing")
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            doc = json.loads(line)
            x, y = doc["x"], doc["y"]
        except (json.JSONDecodeError, KeyError, TypeError):
            raise CorruptRecord(lineno, "not a record object") from None
        if not (isinstance(x, list) and isinstance(y, list)) or len(x) != len(y):
            raise CorruptRecord(lineno, "x and y must be lists of equal length")
        if not all(isinstance(v, int) and not isinstance(v, bool) for v in x + y):
            raise CorruptRecord(lineno, "tokens must be integers")
        if len(x) != header.length:
            raise CorruptRecord(lineno, f"expected length {header.length}, got {len(x)}")
        if G is not None:
            if any(not 0 <= v < G.order for v in x):
                raise CorruptRecord(lineno, "token outside the group")
            if gc.prefix_products(G, x) != y:
                raise CorruptRecord(lineno, "y is not the prefix product of x")
        records.append(TaskRecord(tuple(x), tuple(y)))
    if len(records) != header.count:
        raise CorruptRecord(len(lines) + 1, f"expected {header.count} records, found {len(records)}")
    return header, records


def curriculum_plan(max_len: int, start: int = 2, stride: int = 1) -> list[int]:
    """Increasing training lengths from ``start``; ``max_len`` is always the last entry."""
    if not 2 <= start <= max_len:
        raise ValueError("need 2 <= start <= max_len")
    if stride < 1:
        raise ValueError("stride must be positive")
    plan = list(range(start, max_len + 1, stride))
    if plan[-1] != max_len:
        plan.append(max_len)
    return plan
