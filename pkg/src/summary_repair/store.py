"""Append-only run persistence: one directory per run.

Layout: <root>/<run_id>/manifest.json plus records.jsonl, one record per
line. Appends are serialised and fsynced; reopening a store after a
crash truncates a torn tail line so the surviving file is always whole
lines. Reports are computed from these files alone.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DuplicateRecordError, RunNotFoundError, StoreError
from .records import (
    Phase,
    Protocol,
    RecordKey,
    RepairMethod,
    RunRecord,
    VerdictStatus,
    method_key,
)

MANIFEST_NAME = "manifest.json"
RECORDS_NAME = "records.jsonl"


@dataclass(frozen=True)
class RunManifest:
    run_id: str
    protocol: Protocol
    dataset_path: str
    dataset_digest: str
    task_ids: tuple[str, ...]
    model_ids: tuple[str, ...]
    methods: tuple[str, ...]
    options: dict
    created_at: str

    def to_json_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "protocol": self.protocol.value,
            "dataset_path": self.dataset_path,
            "dataset_digest": self.dataset_digest,
            "task_ids": list(self.task_ids),
            "model_ids": list(self.model_ids),
            "methods": list(self.methods),
            "options": self.options,
            "created_at": self.created_at,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "RunManifest":
        try:
            return cls(
                run_id=obj["run_id"],
                protocol=Protocol(obj["protocol"]),
                dataset_path=obj["dataset_path"],
                dataset_digest=obj["dataset_digest"],
                task_ids=tuple(obj["task_ids"]),
                model_ids=tuple(obj["model_ids"]),
                methods=tuple(obj["methods"]),
                options=obj["options"],
                created_at=obj["created_at"],
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise StoreError(f"malformed manifest: {exc}") from exc


class RunStore:
    """Filesystem-backed record store with duplicate-key protection."""

    def __init__(self, root: Path) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._keys: dict[str, set[RecordKey]] = {}

    def _run_dir(self, run_id: str) -> Path:
        return self.root / run_id

    def _records_path(self, run_id: str) -> Path:
        return self._run_dir(run_id) / RECORDS_NAME

    def list_runs(self) -> list[str]:
        return sorted(
            p.name for p in self.root.iterdir() if (p / MANIFEST_NAME).is_file()
        )

    def create_run(self, manifest: RunManifest) -> None:
        run_dir = self._run_dir(manifest.run_id)
        if run_dir.exists():
            raise StoreError(f"run {manifest.run_id!r} already exists in {self.root}")
        run_dir.mkdir(parents=True)
        manifest_path = run_dir / MANIFEST_NAME
        manifest_path.write_text(
            json.dumps(manifest.to_json_dict(), indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
        self._records_path(manifest.run_id).touch()
        with self._lock:
            self._keys[manifest.run_id] = set()

    def load_manifest(self, run_id: str) -> RunManifest:
        path = self._run_dir(run_id) / MANIFEST_NAME
        if not path.is_file():
            raise RunNotFoundError(f"no run {run_id!r} under {self.root}")
        try:
            return RunManifest.from_json_dict(json.loads(path.read_text(encoding="utf-8")))
        except ValueError as exc:
            raise StoreError(f"unreadable manifest for {run_id!r}: {exc}") from exc

    def _recover(self, run_id: str) -> list[dict]:
        """Read all whole-line records, truncating a torn tail in place."""
        path = self._records_path(run_id)
        if not path.is_file():
            if not (self._run_dir(run_id) / MANIFEST_NAME).is_file():
                raise RunNotFoundError(f"no run {run_id!r} under {self.root}")
            path.touch()
            return []
        raw = path.read_bytes()
        keep = len(raw)
        if raw and not raw.endswith(b"\n"):
            keep = raw.rfind(b"\n") + 1
        body = raw[:keep]
        # JSON escapes newlines inside strings, so byte-level line splits
        # are exact; the final split element is the empty post-newline tail.
        whole = body.split(b"\n")[:-1] if body else []
        records = []
        pos = 0
        for i, line_bytes in enumerate(whole):
            if line_bytes.strip():
                try:
                    records.append(json.loads(line_bytes.decode("utf-8")))
                except (ValueError, UnicodeDecodeError) as exc:
                    if i == len(whole) - 1:
                        # A flushed-but-garbled tail is recoverable too.
                        keep = pos
                        break
                    raise StoreError(
                        f"{path}:{i + 1}: corrupt interior record: {exc}"
                    ) from exc
            pos += len(line_bytes) + 1
        if keep < len(raw):
            with open(path, "r+b") as handle:
                handle.truncate(keep)
        return records

    def _ensure_keys(self, run_id: str) -> set[RecordKey]:
        if run_id not in self._keys:
            records = self._recover(run_id)
            keys = set()
            for obj in records:
                rec = RunRecord.from_json_dict(obj)
                if rec.key in keys:
                    raise StoreError(f"run {run_id!r} holds duplicate key {rec.key}")
                keys.add(rec.key)
            self._keys[run_id] = keys
        return self._keys[run_id]

    def completed_keys(self, run_id: str) -> set[RecordKey]:
        with self._lock:
            return set(self._ensure_keys(run_id))

    def append_record(self, run_id: str, record: RunRecord) -> None:
        with self._lock:
            keys = self._ensure_keys(run_id)
            if record.key in keys:
                raise DuplicateRecordError(f"key already stored: {record.key}")
            line = json.dumps(record.to_json_dict(), ensure_ascii=False)
            if "\n" in line:
                raise StoreError("record serialisation produced an embedded newline")
            path = self._records_path(run_id)
            with open(path, "a", encoding="utf-8") as handle:
                handle.write(line + "\n")
                handle.flush()
                os.fsync(handle.fileno())
            keys.add(record.key)

    def query(
        self,
        run_id: str,
        model: str | None = None,
        method: RepairMethod | str | None = None,
        phase: Phase | None = None,
        verdict: VerdictStatus | None = None,
    ) -> list[RunRecord]:
        with self._lock:
            raw = self._recover(run_id)
        records = [RunRecord.from_json_dict(obj) for obj in raw]
        wanted_method = (
            method if isinstance(method, str) or method is None else method_key(method)
        )
        out = []
        for rec in records:
            if model is not None and rec.model_id != model:
                continue
            if wanted_method is not None and method_key(rec.method) != wanted_method:
                continue
            if phase is not None and rec.phase is not phase:
                continue
            if verdict is not None and rec.verdict.status is not verdict:
                continue
            out.append(rec)
        return out
