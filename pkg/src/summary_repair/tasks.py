"""Benchmark loading and validation.

Both benchmarks arrive as line-delimited JSON and are normalised into
RepairTask values. Loaders never touch the network; fetching and caching
is the CLI's job. Validation executes each task's reference solution
against its own tests through a caller-supplied runner.
"""

from __future__ import annotations

import ast
import hashlib
import json
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Protocol

from .errors import DatasetValidationError, LoadError
from .records import TaskOrigin, Verdict, VerdictStatus

HUMANEVALPACK_COUNT = 164
MBPP_TEST_COUNT = 500
MBPP_TEST_ID_RANGE = range(11, 511)

_HEP_FIELDS = (
    "task_id",
    "declaration",
    "buggy_solution",
    "canonical_solution",
    "test",
    "entry_point",
    "bug_type",
)
_MBPP_FIELDS = ("task_id", "text", "code", "test_list")


class ProgramRunner(Protocol):
    """Anything that can execute an assembled program and judge it."""

    def run(self, program: str) -> Verdict: ...


@dataclass(frozen=True)
class RepairTask:
    id: str
    origin: TaskOrigin
    entry_point: str
    signature: str
    prelude: str
    subject_code: str
    description: str
    canonical_solution: str
    test_code: str
    bug_type: str | None = None

    def __post_init__(self) -> None:
        if not self.entry_point.isidentifier():
            raise DatasetValidationError(
                f"{self.id}: entry_point {self.entry_point!r} is not an identifier"
            )
        if not re.search(rf"\b{re.escape(self.entry_point)}\b", self.test_code):
            raise DatasetValidationError(
                f"{self.id}: entry_point {self.entry_point!r} never appears in test_code"
            )
        if self.origin is TaskOrigin.HUMANEVALPACK:
            if not self.subject_code.strip():
                raise DatasetValidationError(f"{self.id}: buggy subject_code is empty")
            if not self.bug_type:
                raise DatasetValidationError(f"{self.id}: bug_type missing")
        if self.origin is TaskOrigin.MBPP and not self.description.strip():
            raise DatasetValidationError(f"{self.id}: description is empty")

    def with_subject_code(self, code: str) -> "RepairTask":
        return replace(self, subject_code=code)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "origin": self.origin.value,
            "entry_point": self.entry_point,
            "signature": self.signature,
            "prelude": self.prelude,
            "subject_code": self.subject_code,
            "description": self.description,
            "canonical_solution": self.canonical_solution,
            "test_code": self.test_code,
            "bug_type": self.bug_type,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "RepairTask":
        data = dict(obj)
        data["origin"] = TaskOrigin(data["origin"])
        return cls(**data)


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def first_assertion(test_code: str) -> str:
    """The first assert statement line, for the {example_test} binding."""
    for line in test_code.splitlines():
        if line.lstrip().startswith("assert"):
            return line.strip()
    raise DatasetValidationError("test_code contains no assert statement")


def strip_function_docstring(source: str) -> str:
    """Drop the leading docstring of the first function, keeping offsets sane."""
    try:
        tree = ast.parse(source)
    except SyntaxError:
        return source
    func = next(
        (n for n in tree.body if isinstance(n, (ast.FunctionDef, ast.AsyncFunctionDef))),
        None,
    )
    if func is None or not func.body:
        return source
    head = func.body[0]
    if not (
        isinstance(head, ast.Expr)
        and isinstance(head.value, ast.Constant)
        and isinstance(head.value.value, str)
    ):
        return source
    lines = source.splitlines(keepends=True)
    del lines[head.lineno - 1 : head.end_lineno]
    if len(func.body) == 1:
        lines.insert(head.lineno - 1, " " * head.col_offset + "pass\n")
    return "".join(lines)


def split_declaration(declaration: str, entry_point: str) -> tuple[str, str]:
    """Split imports/context (prelude) from the signature of entry_point."""
    lines = declaration.splitlines(keepends=True)
    pattern = re.compile(rf"^(?:async\s+)?def\s+{re.escape(entry_point)}\s*\(")
    for i, line in enumerate(lines):
        if pattern.match(line):
            return "".join(lines[:i]), "".join(lines[i:])
    raise DatasetValidationError(f"declaration never declares {entry_point!r}")


def _glue(*parts: str) -> str:
    chunks = [p.rstrip("\n") for p in parts if p.strip()]
    return "\n".join(chunks) + "\n" if chunks else ""


def _read_ldjson(path: Path) -> list[dict]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise LoadError(f"cannot read {path}: {exc}") from exc
    records = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except ValueError as exc:
            raise LoadError(f"{path}:{lineno}: malformed JSON: {exc}") from exc
        if not isinstance(obj, dict):
            raise LoadError(f"{path}:{lineno}: record is not an object")
        records.append(obj)
    if not records:
        raise LoadError(f"{path}: 0 records")
    return records


def _require(obj: dict, fields: Iterable[str], path: Path, lineno: int) -> None:
    for name in fields:
        if name not in obj:
            raise LoadError(f"{path}:{lineno}: missing field {name!r}")


def load_humanevalpack(source: Path) -> list[RepairTask]:
    """Load the 164-task fix split into self-contained repair tasks."""
    path = Path(source)
    if path.is_dir():
        candidates = sorted(path.glob("*.jsonl"))
        if not candidates:
            raise LoadError(f"{path}: no .jsonl file in directory")
        path = candidates[0]
    records = _read_ldjson(path)
    tasks = []
    for lineno, obj in enumerate(records, start=1):
        _require(obj, _HEP_FIELDS, path, lineno)
        try:
            entry_point = obj["entry_point"]
            prelude, signature = split_declaration(obj["declaration"], entry_point)
            subject_code = strip_function_docstring(
                _glue_signature_body(signature, obj["buggy_solution"])
            )
            canonical = _glue_signature_body(signature, obj["canonical_solution"])
            tasks.append(
                RepairTask(
                    id=obj["task_id"],
                    origin=TaskOrigin.HUMANEVALPACK,
                    entry_point=entry_point,
                    signature=signature,
                    prelude=prelude,
                    subject_code=subject_code,
                    description="",
                    canonical_solution=canonical,
                    test_code=obj["test"],
                    bug_type=obj["bug_type"],
                )
            )
        except DatasetValidationError as exc:
            raise LoadError(f"{path}:{lineno}: {exc}") from exc
    if len(tasks) != HUMANEVALPACK_COUNT:
        raise DatasetValidationError(
            f"{path}: expected {HUMANEVALPACK_COUNT} fix-split tasks, found {len(tasks)}"
        )
    return tasks


def _glue_signature_body(signature: str, body: str) -> str:
    sig = signature if signature.endswith("\n") else signature + "\n"
    return sig + body


def load_mbpp_test(source: Path) -> list[RepairTask]:
    """Load the 500-task test split (task ids 11 through 510)."""
    path = Path(source)
    records = _read_ldjson(path)
    tasks = []
    for lineno, obj in enumerate(records, start=1):
        _require(obj, _MBPP_FIELDS, path, lineno)
        raw_id = obj["task_id"]
        if not isinstance(raw_id, int) or raw_id not in MBPP_TEST_ID_RANGE:
            continue
        task_id = f"mbpp/{raw_id}"
        test_list = obj["test_list"]
        if not isinstance(test_list, list) or not test_list:
            raise DatasetValidationError(f"{task_id}: empty assertion list")
        setup = obj.get("test_setup_code") or ""
        test_code = _glue(setup, *test_list)
        try:
            entry_point = _derive_entry_point(obj["code"], test_list, task_id)
            tasks.append(
                RepairTask(
                    id=task_id,
                    origin=TaskOrigin.MBPP,
                    entry_point=entry_point,
                    signature="",
                    prelude="",
                    subject_code="",
                    description=obj["text"],
                    canonical_solution=obj["code"],
                    test_code=test_code,
                    bug_type=None,
                )
            )
        except DatasetValidationError as exc:
            raise LoadError(f"{path}:{lineno}: {exc}") from exc
    if len(tasks) != MBPP_TEST_COUNT:
        raise DatasetValidationError(
            f"{path}: expected {MBPP_TEST_COUNT} test-split tasks, found {len(tasks)}"
        )
    return tasks


def _derive_entry_point(code: str, test_list: list, task_id: str) -> str:
    """The tests name no function explicitly; intersect defs with calls."""
    try:
        tree = ast.parse(code)
    except SyntaxError as exc:
        raise DatasetValidationError(f"{task_id}: reference code does not parse: {exc}")
    defs = [
        n.name for n in tree.body if isinstance(n, (ast.FunctionDef, ast.AsyncFunctionDef))
    ]
    if not defs:
        raise DatasetValidationError(f"{task_id}: reference code defines no function")
    joined = "\n".join(str(t) for t in test_list)
    called = [n for n in defs if re.search(rf"\b{re.escape(n)}\s*\(", joined)]
    if not called:
        raise DatasetValidationError(f"{task_id}: tests call none of the defined functions")
    if len(called) > 1:
        first = str(test_list[0])
        in_first = [n for n in called if re.search(rf"\b{re.escape(n)}\s*\(", first)]
        called = in_first or called
    return called[-1]


def load_exclusions(path: Path) -> frozenset[str]:
    """Task ids to drop, one per line; blank lines and # comments ignored."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise LoadError(f"cannot read exclusions {path}: {exc}") from exc
    ids = set()
    for line in text.splitlines():
        stripped = line.strip()
        if stripped and not stripped.startswith("#"):
            ids.add(stripped)
    return frozenset(ids)


def apply_exclusions(tasks: list[RepairTask], excluded: frozenset[str]) -> list[RepairTask]:
    return [t for t in tasks if t.id not in excluded]


def validation_program(task: RepairTask) -> str:
    """Reference solution plus tests, ready for a runner."""
    return _glue(task.prelude, task.canonical_solution, task.test_code)


def buggy_program(task: RepairTask) -> str:
    """Shipped buggy solution plus tests; must not pass."""
    return _glue(task.prelude, task.subject_code, task.test_code)


@dataclass(frozen=True)
class ValidationEntry:
    id: str
    verdict: str
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    entries: tuple[ValidationEntry, ...]

    @property
    def pass_fraction(self) -> float:
        if not self.entries:
            return 0.0
        passed = sum(1 for e in self.entries if e.verdict == VerdictStatus.PASS.value)
        return passed / len(self.entries)

    def failures(self) -> list[str]:
        return [e.id for e in self.entries if e.verdict != VerdictStatus.PASS.value]

    def to_ldjson(self) -> str:
        return "".join(
            json.dumps({"id": e.id, "verdict": e.verdict}) + "\n" for e in self.entries
        )


def validate_dataset(tasks: list[RepairTask], runner: ProgramRunner) -> ValidationReport:
    """Run every reference solution against its own tests."""
    entries = []
    for task in tasks:
        verdict = runner.run(validation_program(task))
        entries.append(
            ValidationEntry(id=task.id, verdict=verdict.status.value, detail=verdict.detail)
        )
    return ValidationReport(entries=tuple(entries))
