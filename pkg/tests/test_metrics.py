"""Metric arithmetic, aggregation completeness, case analysis, rendering."""

import json

import pytest
from summary_repair.errors import (
    CompletenessError,
    UndefinedMetricError,
    UnsupportedProtocolError,
)
from summary_repair.metrics import (
    CSV_HEADER,
    CaseScope,
    MethodCell,
    adjusted_pass_at_1,
    aggregate,
    case_analysis,
    fix_at_1,
    method_average,
    render_report,
    solve_rate,
)
from summary_repair.prompts import SummaryStyle
from summary_repair.records import (
    Phase,
    Protocol,
    RepairMethod,
    TaskOrigin,
    VerdictStatus,
)

from helpers import make_record

DIRECT = RepairMethod.direct()
ERROR = RepairMethod.summary(SummaryStyle.ERROR)
ALL_STYLES = [RepairMethod.summary(s) for s in SummaryStyle]


@pytest.mark.parametrize(
    "fixed,attempted,expected",
    [
        (94, 164, 57.32),
        (106, 164, 64.63),
        (12, 111, 10.81),
        (1, 800, 0.13),  # 0.125 rounds half-up, not to even
        (0, 5, 0.0),
        (5, 5, 100.0),
        (1, 3, 33.33),
        (2, 3, 66.67),
    ],
)
def test_fix_at_1_quantisation(fixed, attempted, expected):
    assert fix_at_1(fixed, attempted) == expected


def test_fix_at_1_domain():
    with pytest.raises(UndefinedMetricError):
        fix_at_1(0, 0)
    with pytest.raises(ValueError):
        fix_at_1(3, 2)
    with pytest.raises(ValueError):
        fix_at_1(-1, 2)


def test_adjusted_pass_at_1_and_solve_rate():
    assert adjusted_pass_at_1(333, 8, 500) == 68.20
    assert adjusted_pass_at_1(333, 0, 500) == 66.60
    assert solve_rate(333, 500) == 66.60
    assert solve_rate(389, 500) == 77.80
    with pytest.raises(UndefinedMetricError):
        adjusted_pass_at_1(0, 0, 0)
    with pytest.raises(ValueError):
        adjusted_pass_at_1(400, 101, 500)
    with pytest.raises(UndefinedMetricError):
        solve_rate(0, 0)


def test_method_average_rounds_half_up_at_one_decimal():
    cells = [
        MethodCell("m1", ERROR, 100, 10, 10.05),
        MethodCell("m2", ERROR, 100, 10, 10.05),
        MethodCell("m1", DIRECT, 100, 50, 50.00),
    ]
    assert method_average(cells, ERROR) == 10.1  # mean 10.05, not 10.0
    assert method_average(cells, DIRECT) == 50.0
    with pytest.raises(UndefinedMetricError):
        method_average(cells, RepairMethod.summary(SummaryStyle.BASE))


def test_method_cell_validation():
    with pytest.raises(ValueError):
        MethodCell("m", DIRECT, attempted=2, fixed=3, fix_at_1=None)
    with pytest.raises(ValueError):
        MethodCell("m", DIRECT, attempted=2, fixed=1, fix_at_1=50.0, initial_pass=4)


def _bug_repair_records():
    recs = []
    for task, status in (("hep/1", VerdictStatus.PASS), ("hep/2", VerdictStatus.FAIL)):
        recs.append(make_record(task_id=task, method=DIRECT, status=status))
    for task in ("hep/1", "hep/2"):
        recs.append(make_record(task_id=task, method=ERROR, status=VerdictStatus.PASS))
    return recs


def test_aggregate_bug_repair_cells():
    cells = aggregate(
        _bug_repair_records(),
        Protocol.BUG_REPAIR,
        task_ids=["hep/1", "hep/2"],
        model_ids=["mock-model"],
        methods=[DIRECT, ERROR],
    )
    assert [(c.attempted, c.fixed, c.fix_at_1) for c in cells] == [
        (2, 1, 50.0),
        (2, 2, 100.0),
    ]
    assert all(c.initial_pass is None and c.total is None for c in cells)


def test_aggregate_rejects_duplicates_and_gaps():
    records = _bug_repair_records()
    with pytest.raises(CompletenessError, match="duplicate record key"):
        aggregate(
            records + [records[0]],
            Protocol.BUG_REPAIR,
            task_ids=["hep/1", "hep/2"],
            model_ids=["mock-model"],
            methods=[DIRECT, ERROR],
        )
    with pytest.raises(CompletenessError, match="missing 2 record keys"):
        aggregate(
            records[:2],
            Protocol.BUG_REPAIR,
            task_ids=["hep/1", "hep/2"],
            model_ids=["mock-model"],
            methods=[DIRECT, ERROR],
        )
    partial = aggregate(
        records[:3],
        Protocol.BUG_REPAIR,
        task_ids=["hep/1", "hep/2"],
        model_ids=["mock-model"],
        methods=[DIRECT, ERROR],
        allow_partial=True,
    )
    assert [(c.fixed, c.fix_at_1) for c in partial] == [(1, 50.0), (1, 50.0)]


def _self_repair_records():
    mk = lambda **kw: make_record(origin=TaskOrigin.MBPP, **kw)
    recs = [
        mk(task_id="mbpp/1", method=None, phase=Phase.INITIAL_SOLVE, status=VerdictStatus.PASS),
        mk(task_id="mbpp/2", method=None, phase=Phase.INITIAL_SOLVE, status=VerdictStatus.PASS),
        mk(task_id="mbpp/3", method=None, phase=Phase.INITIAL_SOLVE, status=VerdictStatus.FAIL),
        mk(
            task_id="mbpp/4",
            method=None,
            phase=Phase.INITIAL_SOLVE,
            status=VerdictStatus.ERROR,
            detail="ZeroDivisionError: division by zero",
        ),
        mk(
            task_id="mbpp/5",
            method=None,
            phase=Phase.INITIAL_SOLVE,
            status=VerdictStatus.EXTRACTION_FAILURE,
            candidate_code="",
        ),
        mk(task_id="mbpp/3", method=ERROR, status=VerdictStatus.PASS),
        mk(task_id="mbpp/4", method=ERROR, status=VerdictStatus.FAIL),
    ]
    return recs


def test_aggregate_self_repair_counts_and_exclusions():
    task_ids = [f"mbpp/{i}" for i in range(1, 6)]
    (cell,) = aggregate(
        _self_repair_records(),
        Protocol.SELF_REPAIR,
        task_ids=task_ids,
        model_ids=["mock-model"],
        methods=[ERROR],
    )
    assert cell.attempted == 2  # two failing initials with extractable code
    assert cell.fixed == 1
    assert cell.fix_at_1 == 50.0
    assert cell.initial_pass == 2
    assert cell.adjusted_pass_at_1 == 60.0
    assert cell.total == 5
    assert cell.excluded_initials == 1
    # every task is accounted for exactly once
    assert cell.initial_pass + cell.attempted + cell.excluded_initials == cell.total


def test_aggregate_self_repair_demands_repairs_for_eligible_tasks():
    records = [r for r in _self_repair_records() if r.task_id != "mbpp/3" or r.method is None]
    with pytest.raises(CompletenessError, match="missing 1 record keys"):
        aggregate(
            records,
            Protocol.SELF_REPAIR,
            task_ids=[f"mbpp/{i}" for i in range(1, 6)],
            model_ids=["mock-model"],
            methods=[ERROR],
        )


def test_aggregate_self_repair_demands_all_initials():
    records = [r for r in _self_repair_records() if r.task_id != "mbpp/5"]
    with pytest.raises(CompletenessError, match="initial_solve"):
        aggregate(
            records,
            Protocol.SELF_REPAIR,
            task_ids=[f"mbpp/{i}" for i in range(1, 6)],
            model_ids=["mock-model"],
            methods=[ERROR],
        )


def _fix_records(model, task, methods, status=VerdictStatus.PASS):
    return [
        make_record(task_id=task, model_id=model, method=m, status=status)
        for m in methods
    ]


def test_case_analysis_per_model():
    records = []
    # t1: all five styles fix it, baseline does not -> a case
    records += _fix_records("A", "t1", ALL_STYLES)
    records += _fix_records("A", "t1", [DIRECT], status=VerdictStatus.FAIL)
    # t2: four styles only -> not a case
    records += _fix_records("A", "t2", ALL_STYLES[:4])
    # t3: all five styles but also the baseline -> not a case
    records += _fix_records("A", "t3", ALL_STYLES + [DIRECT])
    # model B fixes t1 directly, so t1 is not a case for B
    records += _fix_records("B", "t1", ALL_STYLES + [DIRECT])

    report = case_analysis(records, {"t1": "value misuse"})
    assert report.case_count == 1
    entry = report.entries[0]
    assert (entry.task_id, entry.bug_type, entry.models) == ("t1", "value misuse", ("A",))
    assert report.tally == {"value misuse": 1}


def test_case_analysis_pooled_unions_styles_across_models():
    records = []
    records += _fix_records("A", "t4", ALL_STYLES[:3])
    records += _fix_records("B", "t4", ALL_STYLES[3:])
    records += _fix_records("B", "t9", [DIRECT])  # keeps the baseline key populated

    per_model = case_analysis(records, {}, scope=CaseScope.PER_MODEL)
    pooled = case_analysis(records, {}, scope=CaseScope.POOLED)
    assert per_model.case_count == 0
    assert pooled.case_count == 1
    assert pooled.entries[0].models == ("A", "B")
    assert pooled.entries[0].bug_type == "unknown"


def test_case_analysis_tally_order_and_ldjson():
    records = []
    for task, model in (("t1", "A"), ("t2", "A"), ("t3", "A")):
        records += _fix_records(model, task, ALL_STYLES)
    report = case_analysis(
        records, {"t1": "excess logic", "t2": "value misuse", "t3": "value misuse"}
    )
    assert list(report.tally.items()) == [("value misuse", 2), ("excess logic", 1)]
    lines = [json.loads(line) for line in report.to_ldjson().splitlines()]
    assert lines[0] == {"task_id": "t1", "bug_type": "excess logic", "models": ["A"]}


def test_case_analysis_rejects_other_protocols():
    mbpp = make_record(origin=TaskOrigin.MBPP, task_id="mbpp/1", method=ERROR)
    with pytest.raises(UnsupportedProtocolError):
        case_analysis([mbpp], {})
    initial = make_record(
        origin=TaskOrigin.HUMANEVALPACK,
        method=None,
        phase=Phase.INITIAL_SOLVE,
    )
    with pytest.raises(UnsupportedProtocolError):
        case_analysis([initial], {})


def test_render_markdown_bug_repair_table():
    cells = [
        MethodCell("m1", DIRECT, 164, 94, 57.32),
        MethodCell("m1", ERROR, 164, 100, 60.98),
    ]
    assert render_report(cells) == (
        "| Method | m1 |\n"
        "| --- | ---: |\n"
        "| Direct repair (baseline) | 57.32 |\n"
        "| Summary: error | 60.98 |\n"
    )


def test_render_markdown_self_repair_table():
    cells = [
        MethodCell(
            "m1",
            ERROR,
            attempted=167,
            fixed=8,
            fix_at_1=4.79,
            initial_pass=333,
            adjusted_pass_at_1=68.20,
            total=500,
            excluded_initials=2,
        )
    ]
    assert render_report(cells) == (
        "| Method | m1 fix@1 | m1 pass@1 |\n"
        "| --- | ---: | ---: |\n"
        "| Solve rate (no repair) | -- | 66.60 |\n"
        "| Summary: error | 4.79 | 68.20 |\n"
        "\n"
        "Note: m1: 2 initial responses yielded no code and are excluded "
        "from fix@1 denominators.\n"
    )


def test_render_csv():
    cells = [
        MethodCell("m1", DIRECT, 164, 94, 57.32),
        MethodCell(
            "m1",
            ERROR,
            attempted=167,
            fixed=8,
            fix_at_1=4.79,
            initial_pass=333,
            adjusted_pass_at_1=68.20,
            total=500,
        ),
    ]
    assert render_report(cells, format="csv") == (
        CSV_HEADER + "\n"
        "m1,direct,164,94,57.32,,\n"
        "m1,summary:error,167,8,4.79,333,68.20\n"
    )
    with pytest.raises(ValueError, match="unknown report format"):
        render_report(cells, format="html")
