"""Prompt template registry.

The eight templates below are the complete prompt surface of the harness:
five summarisation styles, the code-generation prompt, the direct-repair
baseline, and the initial-solve prompt used by the self-repair protocol.
The template bodies are load-bearing experiment constants — do not edit
them casually; overriding the protected ones requires an explicit flag.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .errors import RenderError, TemplateNotFoundError, TemplateOverrideError

logger = logging.getLogger(__name__)

KNOWN_PLACEHOLDERS = frozenset({"code", "function", "summary", "task", "example_test"})

_PLACEHOLDER_RE = re.compile(r"\{(code|function|summary|task|example_test)\}")


class PromptRole(Enum):
    SUMMARISE = "summarise"
    GENERATE = "generate"
    DIRECT_REPAIR = "direct_repair"
    INITIAL_SOLVE = "initial_solve"


class SummaryStyle(Enum):
    BASE = "base"
    SHORT = "short"
    INTENT = "intent"
    ERROR = "error"
    WARN = "warn"


@dataclass(frozen=True)
class PromptTemplate:
    """A named prompt body plus the set of placeholders it consumes."""

    name: str
    role: PromptRole
    body: str

    @property
    def placeholders(self) -> frozenset[str]:
        return frozenset(_PLACEHOLDER_RE.findall(self.body))


_TEMPLATES = [
    PromptTemplate(
        name="summ_base",
        role=PromptRole.SUMMARISE,
        body="Summarise the following python code: {code}",
    ),
    PromptTemplate(
        name="summ_short",
        role=PromptRole.SUMMARISE,
        body="Summarise the following python code in one sentence: {code}",
    ),
    PromptTemplate(
        name="summ_intent",
        role=PromptRole.SUMMARISE,
        body="Summarise the following python code, be smart and infer expected functionality: {code}",
    ),
    PromptTemplate(
        name="summ_error",
        role=PromptRole.SUMMARISE,
        body="Summarise the following python code, it contains at least one bug that is making a test fail: {code}",
    ),
    PromptTemplate(
        name="summ_warn",
        role=PromptRole.SUMMARISE,
        body=(
            "Summarise the following python code, it is not very well written, "
            "and might have some bugs, so please work around this when writing "
            "the summary: {code}"
        ),
    ),
    PromptTemplate(
        name="generate",
        role=PromptRole.GENERATE,
        body="Write a python function `{function}`, satisfying the following code summary: {summary}",
    ),
    PromptTemplate(
        name="direct_repair",
        role=PromptRole.DIRECT_REPAIR,
        body="Repair the following python code: {code}",
    ),
    PromptTemplate(
        name="initial_solve",
        role=PromptRole.INITIAL_SOLVE,
        body=(
            "Write a python function `{function}` to solve the following task: {task}\n"
            "Your solution must pass this test: {example_test}"
        ),
    ),
]

DEFAULT_REGISTRY: dict[str, PromptTemplate] = {t.name: t for t in _TEMPLATES}

# Experiment constants; overriding these requires allow_protected_overrides.
# initial_solve is harness-defined and may be overridden freely.
PROTECTED_TEMPLATE_NAMES = frozenset(
    {
        "summ_base",
        "summ_short",
        "summ_intent",
        "summ_error",
        "summ_warn",
        "generate",
        "direct_repair",
    }
)


def summarise_template_name(style: SummaryStyle) -> str:
    return f"summ_{style.value}"


def get_template(name: str, registry: dict[str, PromptTemplate] | None = None) -> PromptTemplate:
    """Look up a template by name; unknown names list the valid ones."""
    reg = DEFAULT_REGISTRY if registry is None else registry
    try:
        return reg[name]
    except KeyError:
        valid = ", ".join(sorted(reg))
        raise TemplateNotFoundError(f"unknown template {name!r}; valid names: {valid}") from None


def render(template: PromptTemplate, bindings: dict[str, str]) -> str:
    """Substitute every placeholder of ``template`` from ``bindings``.

    Binding values are inserted verbatim and never re-scanned, so code
    containing brace characters cannot corrupt the output. Bindings not
    consumed by the template log a warning instead of failing.
    """
    missing = sorted(template.placeholders - set(bindings))
    if missing:
        raise RenderError(f"missing placeholder: {', '.join(missing)}")
    for name in template.placeholders:
        if not bindings[name]:
            raise RenderError(f"empty binding for placeholder: {name}")
    unused = sorted(set(bindings) - template.placeholders)
    if unused:
        logger.warning("unconsumed bindings for %s: %s", template.name, ", ".join(unused))

    parts = _PLACEHOLDER_RE.split(template.body)
    # split() alternates literal, placeholder-name, literal, ...
    out: list[str] = []
    for i, part in enumerate(parts):
        out.append(bindings[part] if i % 2 else part)
    return "".join(out)


def load_template_overrides(
    path: Path,
    allow_protected_overrides: bool = False,
    base: dict[str, PromptTemplate] | None = None,
) -> dict[str, PromptTemplate]:
    """Build a registry from ``base`` plus a JSON name→body override map."""
    base_reg = DEFAULT_REGISTRY if base is None else base
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise TemplateOverrideError(f"cannot read template overrides {path}: {exc}") from exc
    if not isinstance(raw, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in raw.items()
    ):
        raise TemplateOverrideError("template override file must be a JSON object of name -> body")

    registry = dict(base_reg)
    for name, body in raw.items():
        if name in PROTECTED_TEMPLATE_NAMES and not allow_protected_overrides:
            raise TemplateOverrideError(
                f"template {name!r} is protected; pass --allow-template-override to replace it"
            )
        role = base_reg[name].role if name in base_reg else PromptRole.SUMMARISE
        registry[name] = PromptTemplate(name=name, role=role, body=body)
        logger.info("template %s overridden", name)
    return registry
