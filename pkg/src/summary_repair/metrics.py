"""Metrics, table rendering, and case analysis over run records.

fix@1 is the share of attempted repairs whose candidate passed all
tests; adjusted pass@1 folds repairs into the initial solve rate. Cells
round half-up to two decimals and averages to one, so printed tables
replay bit-for-bit from integer counts.
"""

from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from typing import Iterable, Mapping

from .errors import CompletenessError, UndefinedMetricError, UnsupportedProtocolError
from .prompts import SummaryStyle
from .records import (
    MethodKind,
    Phase,
    Protocol,
    RecordKey,
    RepairMethod,
    RunRecord,
    TaskOrigin,
    VerdictStatus,
    all_methods,
    method_key,
)

SOLVE_RATE_LABEL = "Solve rate (no repair)"
CSV_HEADER = "model,method,attempted,fixed,fix_at_1,initial_pass,adjusted_pass_at_1"


def _quantized(numer: int, denom: int, places: str) -> float:
    value = Decimal(100) * Decimal(numer) / Decimal(denom)
    return float(value.quantize(Decimal(places), rounding=ROUND_HALF_UP))


def fix_at_1(fixed: int, attempted: int) -> float:
    """Percentage of attempted repairs that now pass, 2 decimals."""
    if attempted == 0:
        raise UndefinedMetricError("fix@1 undefined for 0 attempts")
    if not 0 <= fixed <= attempted:
        raise ValueError(f"fixed={fixed} out of range for attempted={attempted}")
    return _quantized(fixed, attempted, "0.01")


def adjusted_pass_at_1(initial_pass: int, fixed: int, total: int) -> float:
    """Share of all tasks solved after initial generation plus one repair."""
    if total <= 0:
        raise UndefinedMetricError("adjusted pass@1 undefined for empty task set")
    if initial_pass < 0 or fixed < 0 or initial_pass + fixed > total:
        raise ValueError(
            f"initial_pass={initial_pass} + fixed={fixed} exceeds total={total}"
        )
    return _quantized(initial_pass + fixed, total, "0.01")


def solve_rate(initial_pass: int, total: int) -> float:
    if total <= 0:
        raise UndefinedMetricError("solve rate undefined for empty task set")
    return _quantized(initial_pass, total, "0.01")


def method_average(cells: Iterable["MethodCell"], method: RepairMethod) -> float:
    """Unweighted mean of fix@1 over models, 1 decimal."""
    values = [c.fix_at_1 for c in cells if c.method == method and c.fix_at_1 is not None]
    if not values:
        raise UndefinedMetricError(f"no cells for method {method_key(method)}")
    mean = sum(Decimal(f"{v:.2f}") for v in values) / len(values)
    return float(mean.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class MethodCell:
    model_id: str
    method: RepairMethod
    attempted: int
    fixed: int
    fix_at_1: float | None
    initial_pass: int | None = None
    adjusted_pass_at_1: float | None = None
    total: int | None = None
    excluded_initials: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.fixed <= max(self.attempted, 0):
            raise ValueError(f"fixed={self.fixed} exceeds attempted={self.attempted}")
        if (self.initial_pass is None) != (self.adjusted_pass_at_1 is None):
            raise ValueError("initial_pass and adjusted_pass_at_1 come together")


def aggregate(
    records: list[RunRecord],
    protocol: Protocol,
    task_ids: Iterable[str],
    model_ids: Iterable[str],
    methods: list[RepairMethod],
    allow_partial: bool = False,
) -> list[MethodCell]:
    """One cell per (model, method), with completeness checking."""
    task_ids = list(task_ids)
    model_ids = list(model_ids)
    total = len(task_ids)
    seen: set[RecordKey] = set()
    for rec in records:
        if rec.key in seen:
            raise CompletenessError(f"duplicate record key: {rec.key}")
        seen.add(rec.key)

    if protocol is Protocol.BUG_REPAIR:
        return _aggregate_bug_repair(
            records, task_ids, model_ids, methods, seen, allow_partial
        )
    return _aggregate_self_repair(
        records, task_ids, model_ids, methods, seen, total, allow_partial
    )


def _missing_message(missing: set[RecordKey]) -> str:
    sample = ", ".join(repr(k) for k in sorted(missing)[:5])
    return f"run is missing {len(missing)} record keys: {sample}"


def _aggregate_bug_repair(
    records: list[RunRecord],
    task_ids: list[str],
    model_ids: list[str],
    methods: list[RepairMethod],
    seen: set[RecordKey],
    allow_partial: bool,
) -> list[MethodCell]:
    expected = {
        (t, m, method_key(meth), Phase.REPAIR.value)
        for t in task_ids
        for m in model_ids
        for meth in methods
    }
    if not allow_partial:
        missing = expected - seen
        if missing:
            raise CompletenessError(_missing_message(missing))
    attempted = len(task_ids)
    fixed: Counter = Counter()
    for rec in records:
        if rec.phase is Phase.REPAIR and rec.verdict.status is VerdictStatus.PASS:
            fixed[(rec.model_id, method_key(rec.method))] += 1
    cells = []
    for model in model_ids:
        for method in methods:
            n_fixed = fixed[(model, method_key(method))]
            cells.append(
                MethodCell(
                    model_id=model,
                    method=method,
                    attempted=attempted,
                    fixed=n_fixed,
                    fix_at_1=fix_at_1(n_fixed, attempted) if attempted else None,
                )
            )
    return cells


def _aggregate_self_repair(
    records: list[RunRecord],
    task_ids: list[str],
    model_ids: list[str],
    methods: list[RepairMethod],
    seen: set[RecordKey],
    total: int,
    allow_partial: bool,
) -> list[MethodCell]:
    initials: dict[tuple[str, str], RunRecord] = {}
    for rec in records:
        if rec.phase is Phase.INITIAL_SOLVE:
            initials[(rec.task_id, rec.model_id)] = rec

    expected: set[RecordKey] = {
        (t, m, "initial_solve", Phase.INITIAL_SOLVE.value)
        for t in task_ids
        for m in model_ids
    }
    eligible: dict[str, set[str]] = {m: set() for m in model_ids}
    initial_pass: Counter = Counter()
    excluded: Counter = Counter()
    for (task_id, model), rec in initials.items():
        if model not in eligible:
            continue
        if rec.verdict.status is VerdictStatus.PASS:
            initial_pass[model] += 1
        elif rec.candidate_code.strip():
            eligible[model].add(task_id)
            expected.update(
                (task_id, model, method_key(meth), Phase.REPAIR.value) for meth in methods
            )
        else:
            excluded[model] += 1
    if not allow_partial:
        missing = expected - seen
        if missing:
            raise CompletenessError(_missing_message(missing))

    fixed: Counter = Counter()
    for rec in records:
        if rec.phase is Phase.REPAIR and rec.verdict.status is VerdictStatus.PASS:
            fixed[(rec.model_id, method_key(rec.method))] += 1

    cells = []
    for model in model_ids:
        attempted = len(eligible[model])
        for method in methods:
            n_fixed = fixed[(model, method_key(method))]
            cells.append(
                MethodCell(
                    model_id=model,
                    method=method,
                    attempted=attempted,
                    fixed=n_fixed,
                    fix_at_1=fix_at_1(n_fixed, attempted) if attempted else None,
                    initial_pass=initial_pass[model],
                    adjusted_pass_at_1=adjusted_pass_at_1(
                        initial_pass[model], n_fixed, total
                    ),
                    total=total,
                    excluded_initials=excluded[model],
                )
            )
    return cells


# ---- case analysis ----------------------------------------------------


class CaseScope(Enum):
    PER_MODEL = "per-model"
    POOLED = "pooled"


@dataclass(frozen=True)
class CaseEntry:
    task_id: str
    bug_type: str
    models: tuple[str, ...]


@dataclass(frozen=True)
class CaseReport:
    scope: CaseScope
    entries: tuple[CaseEntry, ...]

    @property
    def tally(self) -> dict[str, int]:
        counts = Counter(e.bug_type for e in self.entries)
        return dict(sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])))

    @property
    def case_count(self) -> int:
        return len(self.entries)

    def to_ldjson(self) -> str:
        return "".join(
            json.dumps(
                {"task_id": e.task_id, "bug_type": e.bug_type, "models": list(e.models)}
            )
            + "\n"
            for e in self.entries
        )


def case_analysis(
    records: list[RunRecord],
    bug_types: Mapping[str, str],
    scope: CaseScope = CaseScope.PER_MODEL,
) -> CaseReport:
    """Tasks every summary style fixes but the baseline does not."""
    for rec in records:
        if rec.origin is not TaskOrigin.HUMANEVALPACK or rec.phase is not Phase.REPAIR:
            raise UnsupportedProtocolError(
                "case analysis is defined for bug-repair runs only"
            )

    models: list[str] = []
    fixed: dict[tuple[str, str], set[str]] = {}
    for rec in records:
        if rec.model_id not in models:
            models.append(rec.model_id)
        if rec.verdict.status is VerdictStatus.PASS:
            fixed.setdefault((rec.model_id, method_key(rec.method)), set()).add(rec.task_id)

    style_keys = [method_key(RepairMethod.summary(s)) for s in SummaryStyle]
    baseline_key = method_key(RepairMethod.direct())

    def style_sets(model: str) -> list[set[str]]:
        return [fixed.get((model, k), set()) for k in style_keys]

    entries: list[CaseEntry] = []
    if scope is CaseScope.PER_MODEL:
        for model in models:
            sets = style_sets(model)
            cases = set.intersection(*sets) - fixed.get((model, baseline_key), set())
            entries.extend(
                CaseEntry(task_id=t, bug_type=bug_types.get(t, "unknown"), models=(model,))
                for t in sorted(cases)
            )
    else:
        pooled_styles = [
            set().union(*(fixed.get((m, k), set()) for m in models)) for k in style_keys
        ]
        pooled_baseline = set().union(
            *(fixed.get((m, baseline_key), set()) for m in models)
        )
        cases = set.intersection(*pooled_styles) - pooled_baseline
        for task_id in sorted(cases):
            contributing = tuple(
                m
                for m in models
                if any(task_id in fixed.get((m, k), set()) for k in style_keys)
            )
            entries.append(
                CaseEntry(
                    task_id=task_id,
                    bug_type=bug_types.get(task_id, "unknown"),
                    models=contributing,
                )
            )
    return CaseReport(scope=scope, entries=tuple(entries))


# ---- rendering ---------------------------------------------------------


def _fmt(value: float | None) -> str:
    return "--" if value is None else f"{value:.2f}"


def _ordered_methods(cells: list[MethodCell]) -> list[RepairMethod]:
    present = {method_key(c.method) for c in cells}
    return [m for m in all_methods() if method_key(m) in present]


def _ordered_models(cells: list[MethodCell]) -> list[str]:
    models: list[str] = []
    for cell in cells:
        if cell.model_id not in models:
            models.append(cell.model_id)
    return models


def render_report(cells: list[MethodCell], format: str = "markdown") -> str:
    if format == "csv":
        return _render_csv(cells)
    if format == "markdown":
        return _render_markdown(cells)
    raise ValueError(f"unknown report format: {format!r}")


def _render_csv(cells: list[MethodCell]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_HEADER.split(","))
    for cell in cells:
        writer.writerow(
            [
                cell.model_id,
                method_key(cell.method),
                cell.attempted,
                cell.fixed,
                _fmt(cell.fix_at_1) if cell.fix_at_1 is not None else "",
                "" if cell.initial_pass is None else cell.initial_pass,
                "" if cell.adjusted_pass_at_1 is None else _fmt(cell.adjusted_pass_at_1),
            ]
        )
    return buffer.getvalue()


def _render_markdown(cells: list[MethodCell]) -> str:
    models = _ordered_models(cells)
    methods = _ordered_methods(cells)
    by_key = {(c.model_id, method_key(c.method)): c for c in cells}
    self_repair = any(c.adjusted_pass_at_1 is not None for c in cells)

    lines = []
    if not self_repair:
        lines.append("| Method | " + " | ".join(models) + " |")
        lines.append("| --- |" + " ---: |" * len(models))
        for method in methods:
            row = [method.label]
            row.extend(_fmt(by_key[(m, method_key(method))].fix_at_1) for m in models)
            lines.append("| " + " | ".join(row) + " |")
    else:
        header = ["Method"]
        for model in models:
            header.extend([f"{model} fix@1", f"{model} pass@1"])
        lines.append("| " + " | ".join(header) + " |")
        lines.append("| --- |" + " ---: |" * (2 * len(models)))
        solve_row = [SOLVE_RATE_LABEL]
        for model in models:
            cell = by_key[(model, method_key(methods[0]))]
            rate = (
                solve_rate(cell.initial_pass, cell.total)
                if cell.initial_pass is not None and cell.total
                else None
            )
            solve_row.extend(["--", _fmt(rate)])
        lines.append("| " + " | ".join(solve_row) + " |")
        for method in methods:
            row = [method.label]
            for model in models:
                cell = by_key[(model, method_key(method))]
                row.extend([_fmt(cell.fix_at_1), _fmt(cell.adjusted_pass_at_1)])
            lines.append("| " + " | ".join(row) + " |")
        notes = [
            f"{model}: {by_key[(model, method_key(methods[0]))].excluded_initials} "
            "initial responses yielded no code and are excluded from fix@1 denominators"
            for model in models
            if by_key[(model, method_key(methods[0]))].excluded_initials
        ]
        if notes:
            lines.append("")
            lines.extend(f"Note: {note}." for note in notes)
    return "\n".join(lines) + "\n"
