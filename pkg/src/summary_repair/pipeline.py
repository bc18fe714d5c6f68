"""Experiment orchestration for the two protocols.

BugRepair runs every (task, model, method) repair once. SelfRepair first
asks each model to solve every task, then repairs its own failures with
every method. The summary is the only thing carried from the summarise
stage to the generate stage; the subject code never reaches the second
prompt.
"""

from __future__ import annotations

import logging
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Protocol as TypingProtocol

from .errors import (
    ConfigurationError,
    DuplicateRecordError,
    ProviderError,
    SandboxEnvironmentError,
    StoreError,
)
from .extract import extract_code
from .llm import ChatExchange, LlmConfig, Provider, utc_now
from .prompts import (
    PromptTemplate,
    SummaryStyle,
    get_template,
    render,
    summarise_template_name,
)
from .records import (
    MethodKind,
    Phase,
    Protocol,
    RepairMethod,
    RunRecord,
    TaskOrigin,
    Verdict,
    VerdictStatus,
    method_key,
)
from .store import RunManifest, RunStore
from .tasks import RepairTask, first_assertion

logger = logging.getLogger(__name__)


class TestRunner(TypingProtocol):
    """The sandbox surface the pipeline needs."""

    def run_tests(
        self, prelude: str, candidate_code: str, test_code: str
    ) -> Verdict: ...


_ABORT_ERRORS = (ConfigurationError, SandboxEnvironmentError, StoreError)


@dataclass
class Pipeline:
    provider: Provider
    runner: TestRunner
    store: RunStore
    registry: dict[str, PromptTemplate] | None = None
    concurrency: int = 4

    # ---- single-unit operations -------------------------------------

    def summary_mediated_repair(
        self, task: RepairTask, style: SummaryStyle, model: LlmConfig, run_id: str
    ) -> RunRecord:
        method = RepairMethod.summary(style)
        exchanges: list[ChatExchange] = []
        summary_text = ""
        try:
            summ_prompt = render(
                get_template(summarise_template_name(style), self.registry),
                {"code": task.subject_code},
            )
            exchanges.append(self.provider.complete(model, summ_prompt))
            summary_text = exchanges[0].response_text
            # The summary is the sole carrier: bindings hold no subject code.
            gen_prompt = render(
                get_template("generate", self.registry),
                {"function": task.entry_point, "summary": summary_text},
            )
            exchanges.append(self.provider.complete(model, gen_prompt))
        except ProviderError as exc:
            return self._failed_record(
                task, model, method, Phase.REPAIR, run_id, f"provider: {exc}", exchanges
            )
        return self._judge_and_record(
            task, model, method, Phase.REPAIR, run_id, exchanges, summary_text
        )

    def direct_repair(self, task: RepairTask, model: LlmConfig, run_id: str) -> RunRecord:
        method = RepairMethod.direct()
        try:
            prompt = render(
                get_template("direct_repair", self.registry), {"code": task.subject_code}
            )
            exchanges = [self.provider.complete(model, prompt)]
        except ProviderError as exc:
            return self._failed_record(
                task, model, method, Phase.REPAIR, run_id, f"provider: {exc}", []
            )
        return self._judge_and_record(
            task, model, method, Phase.REPAIR, run_id, exchanges, ""
        )

    def initial_solve(self, task: RepairTask, model: LlmConfig, run_id: str) -> RunRecord:
        if task.origin is not TaskOrigin.MBPP:
            raise ConfigurationError(f"initial solve requires an MBPP task, got {task.id}")
        try:
            prompt = render(
                get_template("initial_solve", self.registry),
                {
                    "function": task.entry_point,
                    "task": task.description,
                    "example_test": first_assertion(task.test_code),
                },
            )
            exchanges = [self.provider.complete(model, prompt)]
        except ProviderError as exc:
            return self._failed_record(
                task, model, None, Phase.INITIAL_SOLVE, run_id, f"provider: {exc}", []
            )
        return self._judge_and_record(
            task, model, None, Phase.INITIAL_SOLVE, run_id, exchanges, ""
        )

    def _judge_and_record(
        self,
        task: RepairTask,
        model: LlmConfig,
        method: RepairMethod | None,
        phase: Phase,
        run_id: str,
        exchanges: list[ChatExchange],
        summary_text: str,
    ) -> RunRecord:
        extraction = extract_code(exchanges[-1].response_text, task.entry_point)
        if not extraction.found or not extraction.code.strip():
            verdict = Verdict(status=VerdictStatus.EXTRACTION_FAILURE, detail="", duration_ms=0)
            candidate = ""
        else:
            candidate = extraction.code
            verdict = self.runner.run_tests(task.prelude, candidate, task.test_code)
        return RunRecord(
            run_id=run_id,
            task_id=task.id,
            origin=task.origin,
            model_id=model.model_id,
            method=method,
            phase=phase,
            summary_text=summary_text,
            candidate_code=candidate,
            verdict=verdict,
            exchanges=tuple(exchanges),
            created_at=utc_now(),
        )

    def _failed_record(
        self,
        task: RepairTask,
        model: LlmConfig,
        method: RepairMethod | None,
        phase: Phase,
        run_id: str,
        detail: str,
        exchanges: list[ChatExchange],
    ) -> RunRecord:
        return RunRecord(
            run_id=run_id,
            task_id=task.id,
            origin=task.origin,
            model_id=model.model_id,
            method=method,
            phase=phase,
            summary_text="",
            candidate_code="",
            verdict=Verdict(status=VerdictStatus.ERROR, detail=detail, duration_ms=0),
            exchanges=tuple(exchanges),
            created_at=utc_now(),
        )

    # ---- full experiment runs ----------------------------------------

    def run_experiment(
        self,
        dataset: list[RepairTask],
        models: list[LlmConfig],
        methods: list[RepairMethod],
        protocol: Protocol,
        run_id: str | None = None,
        resume: str | None = None,
        dataset_path: str = "",
        dataset_digest: str = "",
        options: dict | None = None,
    ) -> str:
        _check_dataset_matches(dataset, protocol)
        if not models:
            raise ConfigurationError("no models selected")
        if not methods:
            raise ConfigurationError("no methods selected")

        if resume is not None:
            run_id = resume
            manifest = self.store.load_manifest(run_id)
            if manifest.protocol is not protocol:
                raise ConfigurationError(
                    f"run {run_id!r} was a {manifest.protocol.value} run, not {protocol.value}"
                )
            if dataset_digest and manifest.dataset_digest != dataset_digest:
                raise ConfigurationError(
                    f"dataset digest mismatch for resumed run {run_id!r}"
                )
        else:
            if run_id is None:
                stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")
                run_id = f"{protocol.value}-{stamp}-{uuid.uuid4().hex[:8]}"
            manifest = RunManifest(
                run_id=run_id,
                protocol=protocol,
                dataset_path=dataset_path,
                dataset_digest=dataset_digest,
                task_ids=tuple(t.id for t in dataset),
                model_ids=tuple(m.model_id for m in models),
                methods=tuple(method_key(m) for m in methods),
                options=options or {},
                created_at=utc_now(),
            )
            self.store.create_run(manifest)

        if protocol is Protocol.BUG_REPAIR:
            self._run_bug_repair(dataset, models, methods, run_id)
        else:
            self._run_self_repair(dataset, models, methods, run_id)
        return run_id

    def _run_bug_repair(
        self,
        dataset: list[RepairTask],
        models: list[LlmConfig],
        methods: list[RepairMethod],
        run_id: str,
    ) -> None:
        done = self.store.completed_keys(run_id)
        units = [
            (task, model, method)
            for model in models
            for method in methods
            for task in dataset
            if (task.id, model.model_id, method_key(method), Phase.REPAIR.value) not in done
        ]
        logger.info("bug-repair %s: %d pending units", run_id, len(units))
        self._drain(self._repair_unit, [(t, m, meth, run_id) for t, m, meth in units])

    def _run_self_repair(
        self,
        dataset: list[RepairTask],
        models: list[LlmConfig],
        methods: list[RepairMethod],
        run_id: str,
    ) -> None:
        done = self.store.completed_keys(run_id)
        initial_units = [
            (task, model)
            for model in models
            for task in dataset
            if (task.id, model.model_id, "initial_solve", Phase.INITIAL_SOLVE.value)
            not in done
        ]
        logger.info("self-repair %s: %d pending initial solves", run_id, len(initial_units))
        self._drain(self._initial_unit, [(t, m, run_id) for t, m in initial_units])

        # The repair phase reads initial results back from the store so a
        # resumed run sees work finished by earlier invocations.
        initial_records = {
            (rec.task_id, rec.model_id): rec
            for rec in self.store.query(run_id, phase=Phase.INITIAL_SOLVE)
        }
        done = self.store.completed_keys(run_id)
        repair_units = []
        for model in models:
            for task in dataset:
                rec = initial_records.get((task.id, model.model_id))
                if rec is None or rec.verdict.status is VerdictStatus.PASS:
                    continue
                if not rec.candidate_code.strip():
                    continue  # nothing to summarise: no code was recovered
                failing = task.with_subject_code(rec.candidate_code)
                for method in methods:
                    key = (task.id, model.model_id, method_key(method), Phase.REPAIR.value)
                    if key not in done:
                        repair_units.append((failing, model, method, run_id))
        logger.info("self-repair %s: %d pending repair units", run_id, len(repair_units))
        self._drain(self._repair_unit, repair_units)

    def _repair_unit(
        self, task: RepairTask, model: LlmConfig, method: RepairMethod, run_id: str
    ) -> None:
        if method.kind is MethodKind.DIRECT_REPAIR:
            record = self.direct_repair(task, model, run_id)
        else:
            record = self.summary_mediated_repair(task, method.summary_style, model, run_id)
        self.store.append_record(run_id, record)

    def _initial_unit(self, task: RepairTask, model: LlmConfig, run_id: str) -> None:
        record = self.initial_solve(task, model, run_id)
        self.store.append_record(run_id, record)

    def _drain(self, fn, arglists: list[tuple]) -> None:
        """Run units on a bounded pool; task faults are recorded, not fatal."""
        if not arglists:
            return

        def guarded(args: tuple) -> None:
            try:
                fn(*args)
            except DuplicateRecordError:
                logger.info("unit already recorded: %s", args[0].id)
            except _ABORT_ERRORS:
                raise
            except Exception as exc:  # noqa: BLE001 - survive one bad unit
                self._record_unit_fault(args, exc)

        if self.concurrency <= 1:
            for args in arglists:
                guarded(args)
            return
        pool = ThreadPoolExecutor(max_workers=self.concurrency)
        futures = [pool.submit(guarded, args) for args in arglists]
        try:
            for future in futures:
                future.result()
        finally:
            pool.shutdown(wait=True, cancel_futures=True)

    def _record_unit_fault(self, args: tuple, exc: Exception) -> None:
        task, model = args[0], args[1]
        run_id = args[-1]
        method = args[2] if len(args) == 4 else None
        phase = Phase.REPAIR if method is not None else Phase.INITIAL_SOLVE
        logger.warning("unit %s/%s failed: %s", task.id, model.model_id, exc)
        record = self._failed_record(
            task, model, method, phase, run_id, f"harness: {exc}", []
        )
        try:
            self.store.append_record(run_id, record)
        except DuplicateRecordError:
            logger.warning("fault for %s already recorded elsewhere", task.id)


def _check_dataset_matches(dataset: list[RepairTask], protocol: Protocol) -> None:
    if not dataset:
        raise ConfigurationError("dataset is empty")
    wanted = (
        TaskOrigin.HUMANEVALPACK if protocol is Protocol.BUG_REPAIR else TaskOrigin.MBPP
    )
    bad = [t.id for t in dataset if t.origin is not wanted]
    if bad:
        raise ConfigurationError(
            f"{protocol.value} needs {wanted.value} tasks; mismatched: {bad[:5]}"
        )
