"""Append-only audit trail: exactly one record per gateway request."""

from __future__ import annotations

import json
import threading
from collections import deque
from dataclasses import asdict, dataclass
from pathlib import Path


@dataclass(frozen=True)
class AuditRecord:
    ts: str
    request_id: str
    principal: str
    role: str
    action: str
    resource: str
    outcome: str  # ok | denied | error
    latency_ms: float

    def to_json(self) -> dict:
        return asdict(self)


class AuditLog:
    """NDJSON sink plus an in-memory tail for the audit endpoint.

    Appends are serialized so records are totally ordered by write time.
    On startup the tail of an existing file is reloaded so recent history
    survives restarts.
    """

    def __init__(self, path: str | Path, capacity: int = 10000):
        self._path = Path(path)
        self._lock = threading.Lock()
        self._recent: deque[AuditRecord] = deque(maxlen=capacity)
        if self._path.exists():
            self._reload()

    def _reload(self) -> None:
        with open(self._path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    self._recent.append(AuditRecord(**json.loads(line)))
                except (TypeError, ValueError):
                    continue  # tolerate a torn final line from a hard stop

    def append(self, record: AuditRecord) -> None:
        with self._lock:
            self._path.parent.mkdir(parents=True, exist_ok=True)
            with open(self._path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record.to_json(), separators=(",", ":")) + "\n")
            self._recent.append(record)

    def recent(self, limit: int) -> list[AuditRecord]:
        """Most recent ``limit`` records, newest first."""
        if limit <= 0:
            return []
        with self._lock:
            tail = list(self._recent)[-limit:]
        return tail[::-1]

    def count(self) -> int:
        with self._lock:
            return len(self._recent)
