"""Sandboxed executor for generated python programs.

Usage: python exec_shim.py PROGRAM

Runs one program file and reports a single JSON verdict line as the
last thing written to the real stdout:

    {"status": "pass" | "fail" | "error", "detail": "...", "tests_run": N}

"pass" means every top-level statement ran without raising, "fail"
means an AssertionError escaped, and "error" covers every other
exception, SystemExit included. tests_run counts the top-level assert
statements that were attempted, the failing one included; asserts
inside helper functions execute but are not counted.

The program's own output can never reach the verdict stream: file
descriptor 1 is pointed at /dev/null and sys.stdout at a capped buffer
before any program code runs, while the verdict goes to a private
duplicate of the original descriptor. stdin is /dev/null, address
space is capped, and the process leaves through os._exit so stray
threads or atexit hooks registered by the program cannot hold it open.
The wall clock is the parent's job.
"""

from __future__ import annotations

import ast
import io
import json
import os
import sys
import traceback

OUTPUT_CAP_BYTES = 1 * 1024 * 1024
MEMORY_CAP_BYTES = 512 * 1024 * 1024
DETAIL_CAP_CHARS = 1000


class CappedBuffer(io.TextIOBase):
    """Accepts any amount of text but keeps at most `cap` characters."""

    def __init__(self, cap: int = OUTPUT_CAP_BYTES) -> None:
        self.cap = cap
        self.written = 0
        self._chunks: list[str] = []

    def writable(self) -> bool:
        return True

    def write(self, text: str) -> int:
        text = str(text)
        room = self.cap - self.written
        if room > 0:
            self._chunks.append(text[:room])
        self.written += len(text)
        return len(text)

    def getvalue(self) -> str:
        return "".join(self._chunks)


def _isolate_streams() -> int:
    """Point fd 0 and fd 1 at /dev/null; return a duplicate of the real
    stdout for the verdict."""
    saved_stdout = os.dup(1)
    devnull = os.open(os.devnull, os.O_RDWR)
    os.dup2(devnull, 0)
    os.dup2(devnull, 1)
    os.close(devnull)
    sys.stdout = CappedBuffer()
    return saved_stdout


def _limit_memory() -> None:
    try:
        import resource

        resource.setrlimit(resource.RLIMIT_AS, (MEMORY_CAP_BYTES, MEMORY_CAP_BYTES))
    except (ImportError, ValueError, OSError):
        pass  # best effort; the parent still enforces the wall clock


def _future_flags(tree: ast.Module) -> int:
    """Compiler flags for __future__ imports, applied to every statement
    so split compilation matches whole-file semantics."""
    import __future__ as future_features

    flags = 0
    for node in tree.body:
        if isinstance(node, ast.ImportFrom) and node.module == "__future__":
            for alias in node.names:
                feature = getattr(future_features, alias.name, None)
                if feature is not None:
                    flags |= feature.compiler_flag
    return flags


def _failing_line(program_path: str, exc: BaseException) -> str:
    for frame in reversed(traceback.extract_tb(exc.__traceback__)):
        if frame.filename == program_path:
            text = (frame.line or "").strip()
            return f"line {frame.lineno}: {text}" if text else f"line {frame.lineno}"
    return "unknown line"


def _verdict(status: str, detail: str, tests_run: int) -> dict:
    return {"status": status, "detail": detail[:DETAIL_CAP_CHARS], "tests_run": tests_run}


def run_program(program_path: str) -> dict:
    with open(program_path, "r", encoding="utf-8") as handle:
        source = handle.read()
    try:
        tree = ast.parse(source, filename=program_path)
    except SyntaxError as exc:
        return _verdict("error", f"SyntaxError: {exc.msg} (line {exc.lineno})", 0)
    flags = _future_flags(tree)
    namespace: dict = {"__name__": "__main__", "__file__": program_path}
    tests_run = 0
    for node in tree.body:
        block = ast.Module(body=[node], type_ignores=[])
        try:
            code = compile(block, program_path, "exec", flags=flags, dont_inherit=False)
            exec(code, namespace)
        except AssertionError as exc:
            if isinstance(node, ast.Assert):
                tests_run += 1
            where = _failing_line(program_path, exc)
            message = str(exc)
            detail = f"assertion failed at {where}"
            if message:
                detail = f"{detail}: {message}"
            return _verdict("fail", detail, tests_run)
        except SystemExit as exc:
            return _verdict("error", f"SystemExit: {exc.code}", tests_run)
        except BaseException as exc:  # noqa: BLE001 - judge, never crash
            return _verdict("error", f"{type(exc).__name__}: {exc}", tests_run)
        if isinstance(node, ast.Assert):
            tests_run += 1
    return _verdict("pass", "", tests_run)


def _emit(saved_stdout: int, report: dict) -> None:
    payload = (json.dumps(report, ensure_ascii=True) + "\n").encode("utf-8", "replace")
    while payload:
        written = os.write(saved_stdout, payload)
        payload = payload[written:]


def main(argv: list[str]) -> None:
    saved_stdout = _isolate_streams()
    _limit_memory()
    if len(argv) != 2:
        report = _verdict("error", "shim: usage: exec_shim.py PROGRAM", 0)
    else:
        try:
            report = run_program(argv[1])
        except OSError as exc:
            report = _verdict("error", f"shim: cannot read program: {exc}", 0)
        except BaseException as exc:  # noqa: BLE001 - a verdict must always go out
            report = _verdict(
                "error", f"shim: internal failure: {type(exc).__name__}: {exc}", 0
            )
    _emit(saved_stdout, report)
    os._exit(0)


if __name__ == "__main__":
    main(sys.argv)
