"""Shared domain types: verdicts, methods, phases, and run records.

These sit below the pipeline and the store so both can agree on one
serialised record shape without importing each other.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import StoreError
from .llm import ChatExchange
from .prompts import SummaryStyle


class TaskOrigin(Enum):
    HUMANEVALPACK = "HumanEvalPack"
    MBPP = "MBPP"


class Protocol(Enum):
    BUG_REPAIR = "bug-repair"
    SELF_REPAIR = "self-repair"


class VerdictStatus(Enum):
    PASS = "pass"
    FAIL = "fail"
    ERROR = "error"
    TIMEOUT = "timeout"
    EXTRACTION_FAILURE = "extraction_failure"


@dataclass(frozen=True)
class Verdict:
    status: VerdictStatus
    detail: str = ""
    duration_ms: int = 0

    def __post_init__(self) -> None:
        if self.duration_ms < 0:
            raise ValueError(f"duration_ms must be non-negative, got {self.duration_ms}")


class MethodKind(Enum):
    DIRECT_REPAIR = "direct_repair"
    SUMMARY_MEDIATED = "summary_mediated"


class Phase(Enum):
    INITIAL_SOLVE = "initial_solve"
    REPAIR = "repair"


@dataclass(frozen=True)
class RepairMethod:
    kind: MethodKind
    summary_style: SummaryStyle | None = None

    def __post_init__(self) -> None:
        if self.kind is MethodKind.SUMMARY_MEDIATED and self.summary_style is None:
            raise ValueError("summary-mediated method requires a summary style")
        if self.kind is MethodKind.DIRECT_REPAIR and self.summary_style is not None:
            raise ValueError("direct repair carries no summary style")

    @classmethod
    def direct(cls) -> "RepairMethod":
        return cls(MethodKind.DIRECT_REPAIR)

    @classmethod
    def summary(cls, style: SummaryStyle) -> "RepairMethod":
        return cls(MethodKind.SUMMARY_MEDIATED, style)

    @property
    def label(self) -> str:
        if self.kind is MethodKind.DIRECT_REPAIR:
            return "Direct repair (baseline)"
        return f"Summary: {self.summary_style.value}"


def all_methods() -> list[RepairMethod]:
    """The six methods of one experiment: baseline plus five styles."""
    return [RepairMethod.direct()] + [RepairMethod.summary(s) for s in SummaryStyle]


# Key slot used for initial-solve records, which precede method choice.
INITIAL_SOLVE_KEY = "initial_solve"


def method_key(method: RepairMethod | None) -> str:
    if method is None:
        return INITIAL_SOLVE_KEY
    if method.kind is MethodKind.DIRECT_REPAIR:
        return "direct"
    return f"summary:{method.summary_style.value}"


def parse_method_key(key: str) -> RepairMethod | None:
    if key == INITIAL_SOLVE_KEY:
        return None
    if key == "direct":
        return RepairMethod.direct()
    if key.startswith("summary:"):
        return RepairMethod.summary(SummaryStyle(key.split(":", 1)[1]))
    raise ValueError(f"unknown method key: {key!r}")


RecordKey = tuple[str, str, str, str]  # (task_id, model_id, method_key, phase)


def _is_pipeline_failure(verdict: Verdict) -> bool:
    """Errors raised before the exchanges completed; exchange-count
    invariants cannot hold for these records."""
    return verdict.status is VerdictStatus.ERROR and verdict.detail.startswith(
        ("provider", "harness")
    )


@dataclass(frozen=True)
class RunRecord:
    """One unit of work: a repair attempt or an initial solve."""

    run_id: str
    task_id: str
    origin: TaskOrigin
    model_id: str
    method: RepairMethod | None
    phase: Phase
    summary_text: str
    candidate_code: str
    verdict: Verdict
    exchanges: tuple[ChatExchange, ...]
    created_at: str

    def __post_init__(self) -> None:
        if (self.phase is Phase.INITIAL_SOLVE) != (self.method is None):
            raise ValueError("initial-solve records carry no method; repair records must")
        if self.method is None or self.method.kind is MethodKind.DIRECT_REPAIR:
            if self.summary_text:
                raise ValueError("summary_text must be empty outside summary-mediated repair")
        if _is_pipeline_failure(self.verdict):
            return
        if self.method is not None and self.method.kind is MethodKind.SUMMARY_MEDIATED:
            if len(self.exchanges) != 2:
                raise ValueError(
                    f"summary-mediated repair needs 2 exchanges, got {len(self.exchanges)}"
                )
            if self.summary_text != self.exchanges[0].response_text:
                raise ValueError("summary_text must equal the summarise response")
        elif len(self.exchanges) != 1:
            raise ValueError(f"single-exchange record has {len(self.exchanges)} exchanges")

    @property
    def key(self) -> RecordKey:
        return (self.task_id, self.model_id, method_key(self.method), self.phase.value)

    def to_json_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "task_id": self.task_id,
            "origin": self.origin.value,
            "model_id": self.model_id,
            "method_kind": (
                INITIAL_SOLVE_KEY if self.method is None else self.method.kind.value
            ),
            "summary_style": (
                self.method.summary_style.value
                if self.method is not None and self.method.summary_style is not None
                else ""
            ),
            "phase": self.phase.value,
            "summary_text": self.summary_text,
            "candidate_code": self.candidate_code,
            "verdict_status": self.verdict.status.value,
            "verdict_detail": self.verdict.detail,
            "duration_ms": self.verdict.duration_ms,
            "exchanges": [_exchange_to_dict(e) for e in self.exchanges],
            "created_at": self.created_at,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "RunRecord":
        try:
            kind = obj["method_kind"]
            if kind == INITIAL_SOLVE_KEY:
                method = None
            elif kind == MethodKind.DIRECT_REPAIR.value:
                method = RepairMethod.direct()
            else:
                method = RepairMethod.summary(SummaryStyle(obj["summary_style"]))
            return cls(
                run_id=obj["run_id"],
                task_id=obj["task_id"],
                origin=TaskOrigin(obj["origin"]),
                model_id=obj["model_id"],
                method=method,
                phase=Phase(obj["phase"]),
                summary_text=obj["summary_text"],
                candidate_code=obj["candidate_code"],
                verdict=Verdict(
                    status=VerdictStatus(obj["verdict_status"]),
                    detail=obj["verdict_detail"],
                    duration_ms=obj["duration_ms"],
                ),
                exchanges=tuple(_exchange_from_dict(e) for e in obj["exchanges"]),
                created_at=obj["created_at"],
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise StoreError(f"malformed run record: {exc}") from exc


def _exchange_to_dict(exchange: ChatExchange) -> dict:
    return {
        "request_messages": list(exchange.request_messages),
        "response_text": exchange.response_text,
        "model_id": exchange.model_id,
        "latency_ms": exchange.latency_ms,
        "retry_count": exchange.retry_count,
        "timestamp": exchange.timestamp,
        "prompt_tokens": exchange.prompt_tokens,
        "completion_tokens": exchange.completion_tokens,
    }


def _exchange_from_dict(obj: dict) -> ChatExchange:
    return ChatExchange(
        request_messages=tuple(obj["request_messages"]),
        response_text=obj["response_text"],
        model_id=obj["model_id"],
        latency_ms=obj["latency_ms"],
        retry_count=obj["retry_count"],
        timestamp=obj["timestamp"],
        prompt_tokens=obj.get("prompt_tokens"),
        completion_tokens=obj.get("completion_tokens"),
    )
