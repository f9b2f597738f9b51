"""
Append-only twin log.

One JSON object per line: {"kind", "t", "seq", "payload"}; dead letters
carry "reason" and "raw" instead of a payload.
"""

from __future__ import annotations

import json
import logging
import threading
from collections.abc import Iterable, Iterator
from pathlib import Path
from typing import Any, Optional

logger = logging.getLogger(__name__)

KINDS = ("state", "verdict", "deadletter")


def _line(record: dict[str, Any]) -> str:
    return json.dumps(record, separators=(",", ":"))


class EventStore:
    """
    Thread-safe append-only record store.

    With a path each record is written and flushed as one line of the log
    file, and reads go back to that file. Without a path, or once an I/O
    failure has marked the store degraded, records are kept in memory.
    """

    def __init__(self, path: Optional[Path] = None):
        self.path = Path(path) if path else None
        self.degraded = False
        self._records: list[dict[str, Any]] = []
        self._written = 0
        self._offset = 0
        self._lock = threading.Lock()
        self._fh = None
        if self.path is not None:
            try:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                self._fh = self.path.open("a", encoding="utf-8")
                # earlier runs appended to the same file are not ours
                self._offset = self._fh.tell()
            except OSError as e:
                self._degrade(e)

    def _degrade(self, error: OSError) -> None:
        if not self.degraded:
            logger.warning(f"Twin log {self.path} unavailable, continuing in memory: {error}")
        self.degraded = True
        self._fh = None

    @property
    def in_memory(self) -> int:
        """Number of records held in memory rather than in the file."""
        with self._lock:
            return len(self._records)

    def append(self, kind: str, t: Optional[float], seq: Optional[int], payload: Any = None,
               **extra: Any) -> dict[str, Any]:
        if kind not in KINDS:
            raise ValueError(f"unknown record kind {kind!r}")
        record: dict[str, Any] = {"kind": kind, "t": t, "seq": seq}
        if payload is not None:
            record["payload"] = payload
        record.update(extra)
        with self._lock:
            if self._fh is not None:
                try:
                    self._fh.write(_line(record) + "\n")
                    self._fh.flush()
                    self._written += 1
                    return record
                except OSError as e:
                    self._degrade(e)
            self._records.append(record)
        return record

    def dead_letter(self, t: Optional[float], reason: str, raw: bytes | str) -> dict[str, Any]:
        text = raw.decode("utf-8", errors="replace") if isinstance(raw, bytes) else raw
        return self.append("deadletter", t, None, reason=reason, raw=text)

    def flush(self) -> None:
        with self._lock:
            if self._fh is not None:
                try:
                    self._fh.flush()
                except OSError as e:
                    self._degrade(e)

    def close(self) -> None:
        with self._lock:
            if self._fh is not None:
                try:
                    self._fh.close()
                except OSError as e:
                    logger.warning(f"Closing twin log failed: {e}")
                self._fh = None

    def __enter__(self) -> EventStore:
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def __len__(self) -> int:
        with self._lock:
            return self._written + len(self._records)

    def _from_file(self) -> list[dict[str, Any]]:
        if self.path is None or self._written == 0:
            return []
        try:
            with self.path.open(encoding="utf-8") as fh:
                fh.seek(self._offset)
                return list(_parse_lines(fh, self.path))
        except OSError as e:
            logger.warning(f"Reading twin log {self.path} failed: {e}")
            return []

    def records(self) -> list[dict[str, Any]]:
        """Everything appended through this store, in write order."""
        with self._lock:
            return self._from_file() + list(self._records)

    def query(self, t_range: Optional[tuple[float, float]] = None,
              kind: Optional[str] = None) -> Iterator[dict[str, Any]]:
        """Records with lo <= t < hi and the given kind, in write order."""
        return filter_records(self.records(), t_range, kind)


def _parse_lines(lines: Iterable[str], path: Path) -> Iterator[dict[str, Any]]:
    for n, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            yield json.loads(line)
        except json.JSONDecodeError:
            logger.warning(f"{path}:{n}: unreadable log line skipped")


def filter_records(records: Iterable[dict[str, Any]],
                   t_range: Optional[tuple[float, float]] = None,
                   kind: Optional[str] = None) -> Iterator[dict[str, Any]]:
    for record in records:
        if kind is not None and record.get("kind") != kind:
            continue
        if t_range is not None:
            t = record.get("t")
            if t is None or not t_range[0] <= t < t_range[1]:
                continue
        yield record


def read_log(path: Path, t_range: Optional[tuple[float, float]] = None,
             kind: Optional[str] = None) -> Iterator[dict[str, Any]]:
    """Stream matching records from a twin log file, skipping torn lines."""
    def lines() -> Iterator[dict[str, Any]]:
        with Path(path).open(encoding="utf-8") as fh:
            yield from _parse_lines(fh, Path(path))
    return filter_records(lines(), t_range, kind)


def write_records(path: Path, records: Iterable[dict[str, Any]]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(_line(record) + "\n")
