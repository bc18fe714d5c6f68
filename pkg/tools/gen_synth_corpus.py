#!/usr/bin/env python3
"""Generate the checked-in offline benchmark corpora.

Produces testdata/humanevalpack_synth.jsonl (164 records, fix-split
shape) and testdata/mbpp_synth.jsonl (500 records, test-split shape,
task ids 11..510). Eight small function families cycle through the
records; each buggy variant is verified at generation time to fail its
tests while the canonical solution passes, so the files are usable as
dataset-gate oracles without network access.

Run from the repository root:  python3 tools/gen_synth_corpus.py
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

OUT_DIR = Path(__file__).resolve().parent.parent / "testdata"


@dataclass(frozen=True)
class Family:
    base: str
    args: str
    canonical: list[str]
    buggy: list[str]
    bug_type: str
    description: str  # uses {name} and {args}
    inputs: list[tuple]
    ref: Callable
    prelude: str = ""
    float_tol: bool = False
    helper_call: str = field(default="", repr=False)


FAMILIES = [
    Family(
        base="running_total",
        args="n",
        canonical=[
            "    total = 0",
            "    k = 1",
            "    while k <= n:",
            "        total += k",
            "        k += 1",
            "    return total",
        ],
        buggy=[
            "    total = 0",
            "    k = 1",
            "    while k < n:",
            "        total += k",
            "        k += 1",
            "    return total",
        ],
        bug_type="operator misuse",
        description=(
            "Write a function {name}(n) that returns the sum of the integers "
            "from 1 to n inclusive."
        ),
        inputs=[(5,), (1,), (10,)],
        ref=lambda n: sum(range(1, n + 1)),
    ),
    Family(
        base="clip_to_range",
        args="x, lo, hi",
        canonical=[
            "    if x < lo:",
            "        return lo",
            "    if x > hi:",
            "        return hi",
            "    return x",
        ],
        buggy=[
            "    if x < lo:",
            "        return lo",
            "    return x",
        ],
        bug_type="missing logic",
        description=(
            "Write a function {name}(x, lo, hi) that clamps x into the "
            "closed interval [lo, hi]."
        ),
        inputs=[(5, 0, 3), (-2, 0, 3), (2, 0, 3)],
        ref=lambda x, lo, hi: min(max(x, lo), hi),
    ),
    Family(
        base="area_scaled",
        args="r, s",
        prelude="import math",
        canonical=["    return math.pi * r * r * s"],
        buggy=["    return math.pi * r * 2 * s"],
        bug_type="value misuse",
        description=(
            "Write a function {name}(r, s) that returns the area of a circle "
            "of radius r multiplied by the scale factor s."
        ),
        inputs=[(3, 1.0), (1, 2.0), (4, 0.5)],
        ref=lambda r, s: math.pi * r * r * s,
        float_tol=True,
    ),
    Family(
        base="count_at_least",
        args="xs, t",
        canonical=[
            "    count = 0",
            "    for x in xs:",
            "        if x >= t:",
            "            count += 1",
            "    return count",
        ],
        buggy=[
            "    count = 0",
            "    for x in xs:",
            "        if x > t:",
            "            count += 1",
            "    return count",
        ],
        bug_type="operator misuse",
        description=(
            "Write a function {name}(xs, t) that counts how many elements of "
            "xs are greater than or equal to t."
        ),
        inputs=[([1, 2, 3], 2), ([], 0), ([5, 5, 1], 5)],
        ref=lambda xs, t: sum(1 for x in xs if x >= t),
    ),
    Family(
        base="keep_words",
        args="words, k",
        canonical=["    return [w for w in words if len(w) >= k]"],
        buggy=[
            '    return [w for w in words if len(w) >= k and not w.startswith("a")]'
        ],
        bug_type="excess logic",
        description=(
            "Write a function {name}(words, k) that returns the words whose "
            "length is at least k, preserving order."
        ),
        inputs=[(["apple", "fig", "banana"], 3), (["ant"], 1), (["kiwi"], 5)],
        ref=lambda words, k: [w for w in words if len(w) >= k],
    ),
    Family(
        base="last_position",
        args="xs, v",
        canonical=[
            "    pos = -1",
            "    for j, x in enumerate(xs):",
            "        if x == v:",
            "            pos = j",
            "    return pos",
        ],
        buggy=[
            "    pos = -1",
            "    for j, x in enumerate(xs):",
            "        if x == v:",
            "            pos = x",
            "    return pos",
        ],
        bug_type="variable misuse",
        description=(
            "Write a function {name}(xs, v) that returns the index of the "
            "last occurrence of v in xs, or -1 when absent."
        ),
        inputs=[([7, 1, 7], 7), ([1, 2], 3), ([4], 4)],
        ref=lambda xs, v: max(
            (j for j, x in enumerate(xs) if x == v), default=-1
        ),
    ),
    Family(
        base="evens_upto",
        args="n",
        canonical=["    return list(range(0, n + 1, 2))"],
        buggy=["    return list(range(0, n, 2))"],
        bug_type="value misuse",
        description=(
            "Write a function {name}(n) that returns the even numbers from 0 "
            "through n inclusive, in ascending order."
        ),
        inputs=[(4,), (0,), (7,)],
        ref=lambda n: list(range(0, n + 1, 2)),
    ),
    Family(
        base="merge_totals",
        args="a, b",
        canonical=[
            "    out = dict(a)",
            "    for k, v in b.items():",
            "        out[k] = out.get(k, 0) + v",
            "    return out",
        ],
        buggy=[
            "    out = dict(a)",
            "    for k, v in b.items():",
            "        out[k] = max(out.get(k, 0), v)",
            "    return out",
        ],
        bug_type="function misuse",
        description=(
            "Write a function {name}(a, b) that merges two dicts of counts, "
            "summing the values of shared keys."
        ),
        inputs=[({"a": 1}, {"a": 2}), ({}, {"x": 5}), ({"k": 2, "j": 1}, {"k": 3})],
        ref=lambda a, b: {
            key: a.get(key, 0) + b.get(key, 0) for key in {**a, **b}
        },
    ),
]


def _signature(name: str, family: Family) -> str:
    return f"def {name}({family.args}):"


def _asserts(name: str, family: Family, call: str | None = None) -> list[str]:
    target = call if call is not None else name
    out = []
    for args in family.inputs:
        rendered = ", ".join(repr(a) for a in args)
        expected = family.ref(*args)
        if family.float_tol:
            out.append(f"assert abs({target}({rendered}) - {expected!r}) < 1e-6")
        else:
            out.append(f"assert {target}({rendered}) == {expected!r}")
    return out


def _hep_record(index: int) -> dict:
    family = FAMILIES[index % len(FAMILIES)]
    name = f"{family.base}_{index}"
    signature = _signature(name, family)
    declaration = (
        f"{family.prelude}\n\n\n{signature}\n" if family.prelude else f"{signature}\n"
    )
    buggy_lines = list(family.buggy)
    if index % 2 == 0:
        buggy_lines.insert(0, '    """Helper kept from an earlier draft."""')
    check_lines = ["def check(candidate):"]
    check_lines.extend(f"    {line}" for line in _asserts(name, family, call="candidate"))
    test = "\n".join(check_lines) + f"\n\ncheck({name})\n"
    return {
        "task_id": f"HumanEval/{index}",
        "entry_point": name,
        "declaration": declaration,
        "canonical_solution": "\n".join(family.canonical) + "\n",
        "buggy_solution": "\n".join(buggy_lines) + "\n",
        "bug_type": family.bug_type,
        "test": test,
        "example_test": _asserts(name, family)[0] + "\n",
    }


def _mbpp_record(task_id: int) -> dict:
    family = FAMILIES[(task_id - 11) % len(FAMILIES)]
    name = f"{family.base}_{task_id}"
    code_lines = []
    if family.prelude:
        code_lines.append(family.prelude)
    code_lines.append(_signature(name, family))
    code_lines.extend(family.canonical)
    return {
        "task_id": task_id,
        "text": family.description.format(name=name, args=family.args),
        "code": "\n".join(code_lines) + "\n",
        "test_list": _asserts(name, family),
        "test_setup_code": "",
        "challenge_test_list": [],
    }


def _exec_program(source: str) -> Exception | None:
    namespace: dict = {}
    try:
        exec(compile(source, "<corpus>", "exec"), namespace)
    except Exception as exc:  # noqa: BLE001 - verification wants the exception
        return exc
    return None


def _verify_hep(record: dict) -> None:
    prefix = record["declaration"]
    canonical = prefix + record["canonical_solution"] + "\n" + record["test"]
    fault = _exec_program(canonical)
    assert fault is None, f"{record['task_id']}: canonical failed: {fault!r}"
    buggy = prefix + record["buggy_solution"] + "\n" + record["test"]
    fault = _exec_program(buggy)
    assert isinstance(
        fault, AssertionError
    ), f"{record['task_id']}: buggy solution must fail an assert, got {fault!r}"


def _verify_mbpp(record: dict) -> None:
    program = record["code"] + "\n" + "\n".join(record["test_list"]) + "\n"
    fault = _exec_program(program)
    assert fault is None, f"mbpp/{record['task_id']}: reference failed: {fault!r}"


def main() -> None:
    OUT_DIR.mkdir(parents=True, exist_ok=True)

    hep_records = [_hep_record(i) for i in range(164)]
    names = [r["entry_point"] for r in hep_records]
    assert len(set(names)) == len(names), "entry point collision"
    for record in hep_records:
        _verify_hep(record)
    hep_path = OUT_DIR / "humanevalpack_synth.jsonl"
    hep_path.write_text(
        "".join(json.dumps(r) + "\n" for r in hep_records), encoding="utf-8"
    )
    print(f"wrote {hep_path} ({len(hep_records)} records)")

    mbpp_records = [_mbpp_record(tid) for tid in range(11, 511)]
    for record in mbpp_records:
        _verify_mbpp(record)
    mbpp_path = OUT_DIR / "mbpp_synth.jsonl"
    mbpp_path.write_text(
        "".join(json.dumps(r) + "\n" for r in mbpp_records), encoding="utf-8"
    )
    print(f"wrote {mbpp_path} ({len(mbpp_records)} records)")

    with_le = [
        r for r in hep_records if "<=" in r["canonical_solution"]
    ]
    print(f"canonical solutions containing '<=': {len(with_le)}")
    assert len(with_le) >= 20


if __name__ == "__main__":
    main()
