from __future__ import annotations

import json
import logging
import os
import sqlite3
import tempfile
import time
from collections import Counter
from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Union

from .errors import CorpusFormatError, DatabaseError, DatabaseSchemaError
from .models import FunctionEntry, Label, ParseStatus, ProcessedEntry, id_sort_key


logger = logging.getLogger(__name__)

# Columns the extraction query touches, per table.
REQUIRED_COLUMNS: dict[str, tuple[str, ...]] = {
    "method_change": ("method_change_id", "file_change_id", "code", "before_change"),
    "file_change": ("file_change_id", "programming_language"),
}

INDEXES: tuple[tuple[str, str, str], ...] = (
    ("idx_method_change_file_change_id", "method_change", "file_change_id"),
    ("idx_file_change_file_change_id", "file_change", "file_change_id"),
)

EXTRACT_QUERY = """
SELECT m.method_change_id, m.code, m.before_change, f.programming_language
FROM method_change AS m
INNER JOIN file_change AS f ON m.file_change_id = f.file_change_id
WHERE f.programming_language = 'C' OR f.programming_language = 'C++'
ORDER BY m.rowid
"""

RECORD_FIELDS = frozenset({"id", "code", "label", "status", "normalized", "raw_tokens", "proc_tokens"})


def _text_factory(b: bytes) -> str:
    return b.decode("utf-8", errors="surrogateescape")


def _check_schema(conn: sqlite3.Connection) -> None:
    for table, required in REQUIRED_COLUMNS.items():
        cols = {row[1] for row in conn.execute(f"PRAGMA table_info({table})")}
        if not cols:
            raise DatabaseSchemaError(table)
        missing = [c for c in required if c not in cols]
        if missing:
            raise DatabaseSchemaError(table, missing)


def ensure_indexes(conn: sqlite3.Connection) -> list[str]:
    """Create the join-column indexes when absent. Returns the names that were created."""
    created: list[str] = []
    for name, table, column in INDEXES:
        row = conn.execute("SELECT name FROM sqlite_master WHERE type='index' AND name=?", (name,)).fetchone()
        if row is not None:
            logger.info("index %s already exists", name)
            continue
        t0 = time.perf_counter()
        conn.execute(f"CREATE INDEX IF NOT EXISTS {name} ON {table}({column})")
        conn.commit()
        logger.info("created index %s on %s(%s) in %.2fs", name, table, column, time.perf_counter() - t0)
        created.append(name)
    return created


def ingest_database(db_path: str) -> list[FunctionEntry]:
    """
    Extract C/C++ method-level code from a CVEFixes database.

    before_change code is the vulnerable side of a fix. Entries come back ordered by id; an
    upstream id seen more than once gets a `#<n>` suffix on its repeats.
    """
    if not os.path.isfile(db_path):
        raise DatabaseError(f"database not found: {db_path}")

    try:
        conn = sqlite3.connect(db_path)
    except sqlite3.Error as e:
        raise DatabaseError(f"{db_path}: {e}") from e
    conn.text_factory = _text_factory
    try:
        _check_schema(conn)
        ensure_indexes(conn)
        rows = conn.execute(EXTRACT_QUERY).fetchall()
    except sqlite3.DatabaseError as e:
        raise DatabaseError(f"{db_path}: {e}") from e
    finally:
        conn.close()

    seen: Counter[str] = Counter()
    entries: list[FunctionEntry] = []
    for method_change_id, code, before_change, language in rows:
        base = str(method_change_id)
        seen[base] += 1
        entry_id = base if seen[base] == 1 else f"{base}#{seen[base] - 1}"
        try:
            label = Label.from_before_change(before_change)
        except ValueError as e:
            raise DatabaseError(f"method_change {base}: {e}") from e
        if isinstance(code, bytes):
            # Stored as a BLOB.
            code = _text_factory(code)
        entries.append(FunctionEntry(entry_id=entry_id, code=code or "", label=label, language=language or ""))

    repeated = sum(1 for c in seen.values() if c > 1)
    if repeated:
        logger.warning("%d upstream ids occur more than once; repeats were suffixed with #<n>", repeated)
    if not entries:
        logger.warning("%s: extraction returned zero rows", db_path)

    entries.sort(key=lambda e: id_sort_key(e.entry_id))
    counts = Counter(e.label for e in entries)
    logger.info(
        "extracted %d entries: %d vulnerable, %d non-vulnerable",
        len(entries),
        counts[Label.VULNERABLE],
        counts[Label.NON_VULNERABLE],
    )
    return entries


@dataclass(frozen=True, slots=True)
class CorpusRecord:
    entry_id: str
    code: str
    label: Label
    status: ParseStatus | None = None
    normalized: str | tuple[str, ...] | None = None
    raw_tokens: int | None = None
    proc_tokens: int | None = None

    @classmethod
    def from_entry(cls, entry: FunctionEntry) -> "CorpusRecord":
        return cls(entry_id=entry.entry_id, code=entry.code, label=entry.label)

    @classmethod
    def from_processed(cls, entry: ProcessedEntry) -> "CorpusRecord":
        if entry.label is None:
            raise CorpusFormatError(f"{entry.entry_id}: processed entry has no label")
        normalized = entry.normalized_tokens if entry.normalized_tokens is not None else entry.normalized_text
        return cls(
            entry_id=entry.entry_id,
            code=entry.source,
            label=entry.label,
            status=entry.status,
            normalized=normalized,
            raw_tokens=entry.raw_token_count,
            proc_tokens=entry.processed_token_count if entry.status.ok else None,
        )

    def to_function_entry(self) -> FunctionEntry:
        return FunctionEntry(entry_id=self.entry_id, code=self.code, label=self.label)

    def to_processed(self) -> ProcessedEntry:
        status = self.status if self.status is not None else ParseStatus()
        text = self.normalized if isinstance(self.normalized, str) else None
        toks = self.normalized if isinstance(self.normalized, tuple) else None
        return ProcessedEntry(
            entry_id=self.entry_id,
            status=status,
            source=self.code,
            raw_token_count=self.raw_tokens or 0,
            processed_token_count=self.proc_tokens or 0,
            normalized_text=text,
            normalized_tokens=toks,
            label=self.label,
        )

    def to_json_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"id": self.entry_id, "code": self.code, "label": int(self.label)}
        if self.status is not None:
            d["status"] = str(self.status)
        if self.normalized is not None:
            d["normalized"] = self.normalized if isinstance(self.normalized, str) else list(self.normalized)
        if self.raw_tokens is not None:
            d["raw_tokens"] = self.raw_tokens
        if self.proc_tokens is not None:
            d["proc_tokens"] = self.proc_tokens
        return d

    @classmethod
    def from_json_dict(cls, d: Any) -> "CorpusRecord":
        if not isinstance(d, dict):
            raise ValueError("record must be a JSON object")
        unknown = sorted(set(d) - RECORD_FIELDS)
        if unknown:
            raise ValueError(f"unknown fields: {', '.join(unknown)}")
        for key in ("id", "code", "label"):
            if key not in d:
                raise ValueError(f"missing field {key!r}")
        if not isinstance(d["id"], str) or not d["id"]:
            raise ValueError("id must be a non-empty string")
        if not isinstance(d["code"], str):
            raise ValueError("code must be a string")
        label = d["label"]
        if isinstance(label, bool) or label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {label!r}")

        status = ParseStatus.parse(d["status"]) if "status" in d else None
        normalized = d.get("normalized")
        if isinstance(normalized, list):
            if not all(isinstance(t, str) for t in normalized):
                raise ValueError("normalized token list must hold strings")
            normalized = tuple(normalized)
        elif normalized is not None and not isinstance(normalized, str):
            raise ValueError("normalized must be a string or a list of strings")
        if normalized is not None and status is not None and not status.ok:
            raise ValueError("error records carry no normalized output")

        counts: dict[str, int | None] = {}
        for key in ("raw_tokens", "proc_tokens"):
            v = d.get(key)
            if v is not None and (isinstance(v, bool) or not isinstance(v, int) or v < 0):
                raise ValueError(f"{key} must be a non-negative integer")
            counts[key] = v

        return cls(
            entry_id=d["id"],
            code=d["code"],
            label=Label(label),
            status=status,
            normalized=normalized,
            raw_tokens=counts["raw_tokens"],
            proc_tokens=counts["proc_tokens"],
        )


Recordable = Union[CorpusRecord, FunctionEntry, ProcessedEntry]


def _as_record(item: Recordable) -> CorpusRecord:
    if isinstance(item, CorpusRecord):
        return item
    if isinstance(item, ProcessedEntry):
        return CorpusRecord.from_processed(item)
    return CorpusRecord.from_entry(item)


def atomic_write_text(path: str, text: str) -> None:
    out_dir = os.path.dirname(os.path.abspath(path))
    os.makedirs(out_dir, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_jsonl(path: str, rows: Iterable[Mapping[str, Any]]) -> int:
    lines = [json.dumps(row, sort_keys=True) + "\n" for row in rows]
    atomic_write_text(path, "".join(lines))
    logger.debug("wrote %d records to %s", len(lines), path)
    return len(lines)


def write_corpus(path: str, items: Iterable[Recordable]) -> int:
    """Write a JSONL corpus atomically. Returns the number of records written."""
    records = [_as_record(x) for x in items]
    ids = Counter(r.entry_id for r in records)
    dup = next((i for i, c in ids.items() if c > 1), None)
    if dup is not None:
        raise CorpusFormatError(f"duplicate id {dup!r}", path=path)
    return write_jsonl(path, (r.to_json_dict() for r in records))


def read_corpus(path: str) -> list[CorpusRecord]:
    records: list[CorpusRecord] = []
    seen: dict[str, int] = {}
    with open(path, "r", encoding="utf-8", errors="surrogateescape") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = CorpusRecord.from_json_dict(json.loads(line))
            except (json.JSONDecodeError, ValueError) as e:
                raise CorpusFormatError(str(e), path=path, line=lineno) from e
            if record.entry_id in seen:
                raise CorpusFormatError(
                    f"duplicate id {record.entry_id!r} (first seen on line {seen[record.entry_id]})",
                    path=path,
                    line=lineno,
                )
            seen[record.entry_id] = lineno
            records.append(record)
    return records


def read_entries(path: str) -> list[FunctionEntry]:
    return [r.to_function_entry() for r in read_corpus(path)]
