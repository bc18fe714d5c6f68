"""Recover a compilable candidate function from free-form model output.

Rule order: the last fenced block defining the entry point wins; failing
that, the last fenced block of any kind; failing that, a bare top-level
definition found by line scanning. Extracted code is always a contiguous
substring of the response, recorded via source_span.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

_FENCE_RE = re.compile(r"^\s*```")

# Lines that plausibly belong to a top-level code listing, used when
# expanding a bare definition up (imports, constants, comments,
# decorators) and down (helper defs, calls, assignments).
_TOPLEVEL_CODE_RE = re.compile(
    r"""^(?:
        \#                                              # comment
      | @\w                                             # decorator
      | (?:async[ ]+)?def[ ]                            # function
      | class[ ]
      | (?:import|from|if|elif|else|try|except|finally|
         with|for|while|return|yield|raise|assert|pass|
         break|continue|global|nonlocal|del|print)\b
      | [A-Za-z_][\w.]*(?:\[[^\]]*\])?\s*
        (?:=(?!=)|\+=|-=|\*\*?=|//?=|%=|&=|\|=|\^=|>>=|<<=|\()
    )""",
    re.VERBOSE,
)

_UPWARD_CODE_RE = re.compile(
    r"^(?:#|@\w|(?:import|from)\b|[A-Za-z_][\w.]*(?:\[[^\]]*\])?\s*=(?!=))"
)


class ExtractionStatus(Enum):
    FOUND = "found"
    NOT_FOUND = "not_found"


class ExtractionStrategy(Enum):
    FENCED_BLOCK = "fenced_block"
    BARE_DEF_SCAN = "bare_def_scan"


@dataclass(frozen=True)
class ExtractionResult:
    status: ExtractionStatus
    code: str
    source_span: tuple[int, int]
    strategy: ExtractionStrategy | None

    @property
    def found(self) -> bool:
        return self.status is ExtractionStatus.FOUND


_NOT_FOUND = ExtractionResult(ExtractionStatus.NOT_FOUND, "", (0, 0), None)


def defines_entry_point(code: str, entry_point: str) -> bool:
    """True iff code contains a def (top-level or nested) of entry_point."""
    pattern = re.compile(
        r"^\s*(?:async\s+)?def\s+" + re.escape(entry_point) + r"\s*\(", re.MULTILINE
    )
    return pattern.search(code) is not None


@dataclass(frozen=True)
class _Line:
    start: int
    text: str

    @property
    def end(self) -> int:
        return self.start + len(self.text)

    @property
    def blank(self) -> bool:
        return not self.text.strip()


def _split_lines(response: str) -> list[_Line]:
    lines = []
    pos = 0
    for text in response.splitlines(keepends=True):
        lines.append(_Line(pos, text))
        pos += len(text)
    return lines


def _fenced_blocks(lines: list[_Line]) -> list[tuple[int, int]]:
    """Return (first_line, last_line_exclusive) interior ranges of fences.

    An unterminated opening fence claims everything through end of input.
    """
    blocks = []
    open_at: int | None = None
    for i, line in enumerate(lines):
        if _FENCE_RE.match(line.text):
            if open_at is None:
                open_at = i + 1
            else:
                blocks.append((open_at, i))
                open_at = None
    if open_at is not None:
        blocks.append((open_at, len(lines)))
    return blocks


def _trim_blank_edges(lines: list[_Line], lo: int, hi: int) -> tuple[int, int]:
    while lo < hi and lines[lo].blank:
        lo += 1
    while hi > lo and lines[hi - 1].blank:
        hi -= 1
    return lo, hi


def _span_of(lines: list[_Line], lo: int, hi: int) -> tuple[int, int]:
    if lo >= hi:
        return (0, 0)
    return (lines[lo].start, lines[hi - 1].end)


def _expand_bare_def(lines: list[_Line], anchor: int) -> tuple[int, int]:
    """Grow a capture window around the def at line index ``anchor``."""
    lo = anchor
    # Decorators directly above, then imports/comments/constants with
    # blank runs kept only when more qualifying lines sit above them.
    while lo > 0 and _UPWARD_CODE_RE.match(lines[lo - 1].text):
        lo -= 1
    probe = lo
    while probe > 0:
        j = probe - 1
        while j >= 0 and lines[j].blank:
            j -= 1
        if j < 0 or not _UPWARD_CODE_RE.match(lines[j].text):
            break
        while j > 0 and _UPWARD_CODE_RE.match(lines[j - 1].text):
            j -= 1
        lo = probe = j

    hi = anchor + 1
    probe = hi
    while probe < len(lines):
        line = lines[probe]
        if line.blank:
            probe += 1
            continue
        indented = line.text[0] in " \t"
        if indented or _TOPLEVEL_CODE_RE.match(line.text):
            probe += 1
            hi = probe
        else:
            break
    return lo, hi


def extract_code(response: str, entry_point: str) -> ExtractionResult:
    """Pick the candidate program out of a model response.

    NotFound is an ordinary value; callers map it to their own verdict.
    """
    lines = _split_lines(response)
    blocks = [
        (lo2, hi2)
        for lo, hi in _fenced_blocks(lines)
        for lo2, hi2 in [_trim_blank_edges(lines, lo, hi)]
        if lo2 < hi2
    ]

    for lo, hi in reversed(blocks):
        start, end = _span_of(lines, lo, hi)
        code = response[start:end]
        if defines_entry_point(code, entry_point):
            return ExtractionResult(
                ExtractionStatus.FOUND, code, (start, end), ExtractionStrategy.FENCED_BLOCK
            )

    if blocks:
        lo, hi = blocks[-1]
        start, end = _span_of(lines, lo, hi)
        return ExtractionResult(
            ExtractionStatus.FOUND,
            response[start:end],
            (start, end),
            ExtractionStrategy.FENCED_BLOCK,
        )

    def_re = re.compile(r"^(?:async\s+)?def\s+" + re.escape(entry_point) + r"\s*\(")
    anchor = next((i for i, line in enumerate(lines) if def_re.match(line.text)), None)
    if anchor is None:
        return _NOT_FOUND
    lo, hi = _trim_blank_edges(lines, *_expand_bare_def(lines, anchor))
    start, end = _span_of(lines, lo, hi)
    return ExtractionResult(
        ExtractionStatus.FOUND,
        response[start:end],
        (start, end),
        ExtractionStrategy.BARE_DEF_SCAN,
    )
