"""Run store: appends, duplicate protection, querying, crash recovery."""

import json

import pytest
from summary_repair.errors import DuplicateRecordError, RunNotFoundError, StoreError
from summary_repair.llm import utc_now
from summary_repair.prompts import SummaryStyle
from summary_repair.records import Phase, Protocol, RepairMethod, VerdictStatus
from summary_repair.store import RECORDS_NAME, RunManifest, RunStore

from helpers import make_record


def make_manifest(run_id="run-1", protocol=Protocol.BUG_REPAIR):
    return RunManifest(
        run_id=run_id,
        protocol=protocol,
        dataset_path="/data/set.jsonl",
        dataset_digest="deadbeef",
        task_ids=("HumanEval/0", "HumanEval/1"),
        model_ids=("mock-model",),
        methods=("direct",),
        options={"concurrency": 2},
        created_at=utc_now(),
    )


@pytest.fixture()
def store(tmp_path):
    return RunStore(tmp_path / "runs")


def test_create_and_reload_manifest(store):
    manifest = make_manifest()
    store.create_run(manifest)
    assert store.list_runs() == ["run-1"]
    loaded = store.load_manifest("run-1")
    assert loaded == manifest


def test_create_run_twice_fails(store):
    store.create_run(make_manifest())
    with pytest.raises(StoreError, match="already exists"):
        store.create_run(make_manifest())


def test_missing_run(store):
    with pytest.raises(RunNotFoundError, match="no run"):
        store.load_manifest("ghost")
    with pytest.raises(RunNotFoundError):
        store.completed_keys("ghost")


def test_append_query_round_trip(store):
    store.create_run(make_manifest())
    r1 = make_record(task_id="HumanEval/0", method=RepairMethod.direct())
    r2 = make_record(
        task_id="HumanEval/0",
        method=RepairMethod.summary(SummaryStyle.ERROR),
        status=VerdictStatus.PASS,
    )
    store.append_record("run-1", r1)
    store.append_record("run-1", r2)

    everything = store.query("run-1")
    assert everything == [r1, r2]  # file order
    assert store.query("run-1", verdict=VerdictStatus.PASS) == [r2]
    assert store.query("run-1", method=RepairMethod.direct()) == [r1]
    assert store.query("run-1", method="summary:error") == [r2]
    assert store.query("run-1", model="other") == []
    assert store.query("run-1", phase=Phase.REPAIR) == [r1, r2]
    assert store.completed_keys("run-1") == {r1.key, r2.key}


def test_duplicate_key_rejected(store):
    store.create_run(make_manifest())
    record = make_record()
    store.append_record("run-1", record)
    with pytest.raises(DuplicateRecordError, match="already stored"):
        store.append_record("run-1", make_record(status=VerdictStatus.PASS))


def test_duplicate_detection_survives_reopen(store, tmp_path):
    store.create_run(make_manifest())
    store.append_record("run-1", make_record())
    fresh = RunStore(store.root)
    with pytest.raises(DuplicateRecordError):
        fresh.append_record("run-1", make_record())


def test_torn_tail_is_truncated_on_reopen(store):
    store.create_run(make_manifest())
    keep = [make_record(task_id=f"HumanEval/{i}") for i in range(3)]
    for record in keep:
        store.append_record("run-1", record)
    path = store.root / "run-1" / RECORDS_NAME
    intact = path.read_bytes()
    with open(path, "ab") as handle:
        handle.write(b'{"run_id": "run-1", "task')  # no newline: torn write

    fresh = RunStore(store.root)
    assert fresh.completed_keys("run-1") == {r.key for r in keep}
    assert path.read_bytes() == intact
    # the torn key is free again
    fresh.append_record("run-1", make_record(task_id="HumanEval/99"))


def test_garbled_whole_tail_line_is_dropped(store):
    store.create_run(make_manifest())
    store.append_record("run-1", make_record(task_id="HumanEval/0"))
    path = store.root / "run-1" / RECORDS_NAME
    intact = path.read_bytes()
    with open(path, "ab") as handle:
        handle.write(b"garbage that is not json\n")

    fresh = RunStore(store.root)
    assert len(fresh.completed_keys("run-1")) == 1
    assert path.read_bytes() == intact


def test_interior_corruption_is_fatal(store):
    store.create_run(make_manifest())
    store.append_record("run-1", make_record(task_id="HumanEval/0"))
    path = store.root / "run-1" / RECORDS_NAME
    good_line = path.read_bytes()
    path.write_bytes(b"corrupt interior\n" + good_line)

    fresh = RunStore(store.root)
    with pytest.raises(StoreError, match="corrupt interior"):
        fresh.completed_keys("run-1")


def test_duplicate_keys_in_file_are_fatal(store):
    store.create_run(make_manifest())
    record = make_record()
    store.append_record("run-1", record)
    path = store.root / "run-1" / RECORDS_NAME
    line = path.read_bytes()
    path.write_bytes(line + line)

    fresh = RunStore(store.root)
    with pytest.raises(StoreError, match="duplicate key"):
        fresh.completed_keys("run-1")


def test_unicode_line_separators_survive_round_trip(store):
    store.create_run(make_manifest())
    tricky = "first second third"
    record = make_record(detail=tricky)
    store.append_record("run-1", record)
    fresh = RunStore(store.root)
    loaded = fresh.query("run-1")
    assert loaded == [record]
    assert loaded[0].verdict.detail == tricky


def test_manifest_round_trip_via_json(store):
    manifest = make_manifest(protocol=Protocol.SELF_REPAIR)
    assert RunManifest.from_json_dict(manifest.to_json_dict()) == manifest
    with pytest.raises(StoreError, match="malformed manifest"):
        RunManifest.from_json_dict({"run_id": "x"})


def test_records_file_is_line_delimited_json(store):
    store.create_run(make_manifest())
    store.append_record("run-1", make_record())
    path = store.root / "run-1" / RECORDS_NAME
    lines = path.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 1
    assert json.loads(lines[0])["task_id"] == "HumanEval/0"
