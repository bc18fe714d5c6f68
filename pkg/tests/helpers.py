"""Shared test doubles and builders for the harness suite."""

from __future__ import annotations

import json
import threading
from pathlib import Path

from summary_repair.llm import ChatExchange, utc_now
from summary_repair.records import (
    Phase,
    RepairMethod,
    RunRecord,
    TaskOrigin,
    Verdict,
    VerdictStatus,
)
from summary_repair.sandbox import assemble_program


class InProcessRunner:
    """Executes assembled programs with exec() in this interpreter.

    Test-only stand-in for the subprocess sandbox: fast, deterministic,
    and safe for the trusted programs the suite runs. Implements both the
    pipeline's run_tests surface and the validator's run surface.
    """

    def run_tests(self, prelude: str, candidate_code: str, test_code: str) -> Verdict:
        if not candidate_code.strip():
            raise ValueError("candidate_code must be non-empty")
        return self.run(assemble_program(prelude, candidate_code, test_code))

    def run(self, program: str) -> Verdict:
        namespace: dict = {"__name__": "sandbox_program"}
        try:
            exec(compile(program, "<program>", "exec"), namespace)
        except AssertionError as exc:
            return Verdict(status=VerdictStatus.FAIL, detail=str(exc) or "assertion failed")
        except SystemExit as exc:
            return Verdict(status=VerdictStatus.ERROR, detail=f"SystemExit: {exc.code}")
        except BaseException as exc:  # noqa: BLE001 - judge, do not crash
            return Verdict(status=VerdictStatus.ERROR, detail=f"{type(exc).__name__}: {exc}")
        return Verdict(status=VerdictStatus.PASS)


class ScriptedRunner:
    """Returns verdicts by substring match on the candidate code."""

    def __init__(self, script: dict[str, VerdictStatus] | None = None,
                 default: VerdictStatus = VerdictStatus.FAIL) -> None:
        self.script = dict(script or {})
        self.default = default
        self.calls: list[tuple[str, str, str]] = []

    def run_tests(self, prelude: str, candidate_code: str, test_code: str) -> Verdict:
        self.calls.append((prelude, candidate_code, test_code))
        for needle, status in self.script.items():
            if needle in candidate_code:
                return Verdict(status=status)
        return Verdict(status=self.default)


class CountingProvider:
    """Wraps a provider and counts complete() calls, safely across threads."""

    def __init__(self, inner) -> None:
        self.inner = inner
        self.calls = 0
        self._lock = threading.Lock()

    def complete(self, config, prompt):
        with self._lock:
            self.calls += 1
        return self.inner.complete(config, prompt)


def fenced(code: str) -> str:
    return f"```python\n{code}\n```"


def write_fixture_file(path: Path, fixtures: list[dict]) -> Path:
    path.write_text(
        "".join(json.dumps(f, ensure_ascii=False) + "\n" for f in fixtures),
        encoding="utf-8",
    )
    return path


def make_exchange(prompt: str, response: str, model_id: str = "mock-model") -> ChatExchange:
    return ChatExchange(
        request_messages=({"role": "user", "content": prompt},),
        response_text=response,
        model_id=model_id,
        latency_ms=0,
        retry_count=0,
        timestamp=utc_now(),
    )


def make_record(
    run_id: str = "run-1",
    task_id: str = "HumanEval/0",
    origin: TaskOrigin = TaskOrigin.HUMANEVALPACK,
    model_id: str = "mock-model",
    method: RepairMethod | None = RepairMethod.direct(),
    phase: Phase = Phase.REPAIR,
    status: VerdictStatus = VerdictStatus.FAIL,
    summary_text: str = "",
    candidate_code: str = "def f():\n    return 0\n",
    detail: str = "",
) -> RunRecord:
    """A structurally valid record with the right exchange count."""
    if method is not None and method.summary_style is not None:
        if not summary_text:
            summary_text = "A short summary of the function."
        exchanges = (
            make_exchange("summarise prompt", summary_text, model_id),
            make_exchange("generate prompt", candidate_code, model_id),
        )
    else:
        exchanges = (make_exchange("single prompt", candidate_code, model_id),)
    return RunRecord(
        run_id=run_id,
        task_id=task_id,
        origin=origin,
        model_id=model_id,
        method=method,
        phase=phase,
        summary_text=summary_text,
        candidate_code=candidate_code,
        verdict=Verdict(status=status, detail=detail),
        exchanges=exchanges,
        created_at=utc_now(),
    )
