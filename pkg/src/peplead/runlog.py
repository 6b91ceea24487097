"""Line-delimited JSON run logs.

Every record carries ``schema``, ``kind``, ``step``, ``time`` and ``payload``.
Only ``time`` varies between reruns with the same config and seed.
"""

from __future__ import annotations

import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable

SCHEMA_VERSION = 1
RECORD_KEYS = ("schema", "kind", "step", "time", "payload")
KINDS = ("run_start", "route_step", "evolve_step", "run_end")


def make_record(kind: str, step: int | None, payload: dict[str, Any]) -> dict[str, Any]:
    return {
        "schema": SCHEMA_VERSION,
        "kind": kind,
        "step": step,
        "time": datetime.now(timezone.utc).isoformat(timespec="milliseconds"),
        "payload": payload,
    }


def validate_record(rec: Any) -> None:
    if not isinstance(rec, dict):
        raise ValueError("log record must be an object")
    if tuple(rec) != RECORD_KEYS:
        raise ValueError(f"log record keys must be {RECORD_KEYS}, got {tuple(rec)}")
    if rec["schema"] != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema version {rec['schema']!r}")
    if rec["kind"] not in KINDS:
        raise ValueError(f"unknown record kind {rec['kind']!r}")
    if rec["step"] is not None and (not isinstance(rec["step"], int) or rec["step"] < 0):
        raise ValueError("step must be a non-negative integer or null")
    if not isinstance(rec["time"], str) or not isinstance(rec["payload"], dict):
        raise ValueError("time must be a string and payload an object")


class RunLog:
    """Append-only JSONL writer; use as a context manager."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = self.path.open("w", encoding="utf-8")

    def write(self, kind: str, step: int | None, payload: dict[str, Any]) -> dict[str, Any]:
        rec = make_record(kind, step, payload)
        validate_record(rec)
        self._fh.write(json.dumps(rec, sort_keys=False) + "\n")
        return rec

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> RunLog:
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_log(path: str | Path) -> list[dict[str, Any]]:
    records = []
    for i, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        rec = json.loads(line)
        try:
            validate_record(rec)
        except ValueError as e:
            raise ValueError(f"{path}:{i}: {e}") from e
        records.append(rec)
    return records


def without_time(records: Iterable[dict[str, Any]]) -> list[dict[str, Any]]:
    return [{k: v for k, v in r.items() if k != "time"} for r in records]
