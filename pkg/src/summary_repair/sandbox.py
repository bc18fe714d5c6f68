"""Isolated execution of candidate programs.

Each run writes the assembled program into a private temp directory and
launches a fresh interpreter through the execution shim, which prints a
single JSON verdict line as its last stdout output. The parent enforces
the wall clock; the shim enforces memory and output caps.
"""

from __future__ import annotations

import importlib.util
import json
import subprocess
import sys
import tempfile
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .errors import SandboxEnvironmentError
from .records import Verdict, VerdictStatus

DEFAULT_TIMEOUT_SECONDS = 10
KILL_GRACE_SECONDS = 2.0

_SHIM_STATUS = {
    "pass": VerdictStatus.PASS,
    "fail": VerdictStatus.FAIL,
    "error": VerdictStatus.ERROR,
}


def assemble_program(prelude: str, candidate_code: str, test_code: str) -> str:
    """Join the three program parts; the candidate may shadow the prelude."""
    chunks = [p.rstrip("\n") for p in (prelude, candidate_code, test_code) if p.strip()]
    return "\n".join(chunks) + "\n" if chunks else ""


def default_shim_path() -> Path | None:
    """Locate an installed execution shim without importing it."""
    spec = importlib.util.find_spec("exec_shim")
    if spec is not None and spec.origin and Path(spec.origin).is_file():
        return Path(spec.origin)
    return None


@dataclass
class SubprocessRunner:
    """Runs assembled programs in per-call subprocesses via the shim."""

    shim_path: Path
    timeout_seconds: int = DEFAULT_TIMEOUT_SECONDS
    max_parallel: int | None = None
    interpreter: str = sys.executable
    _gate: threading.Semaphore | None = field(init=False, default=None, repr=False)

    def __post_init__(self) -> None:
        self.shim_path = Path(self.shim_path)
        if not self.shim_path.is_file():
            raise SandboxEnvironmentError(f"shim not found: {self.shim_path}")
        if self.timeout_seconds <= 0:
            raise SandboxEnvironmentError("timeout_seconds must be positive")
        if self.max_parallel is not None:
            if self.max_parallel <= 0:
                raise SandboxEnvironmentError("max_parallel must be positive")
            self._gate = threading.Semaphore(self.max_parallel)

    def run_tests(
        self,
        prelude: str,
        candidate_code: str,
        test_code: str,
        timeout_seconds: int | None = None,
    ) -> Verdict:
        if not candidate_code.strip():
            raise ValueError("candidate_code must be non-empty")
        return self.run(assemble_program(prelude, candidate_code, test_code), timeout_seconds)

    def run(self, program: str, timeout_seconds: int | None = None) -> Verdict:
        timeout = self.timeout_seconds if timeout_seconds is None else timeout_seconds
        if self._gate is not None:
            with self._gate:
                return self._execute(program, timeout)
        return self._execute(program, timeout)

    def _execute(self, program: str, timeout: int) -> Verdict:
        started = time.monotonic()
        with tempfile.TemporaryDirectory(prefix="sandbox-") as workdir:
            program_path = Path(workdir) / "program.py"
            program_path.write_text(program, encoding="utf-8")
            try:
                proc = subprocess.Popen(
                    [self.interpreter, str(self.shim_path), str(program_path)],
                    stdout=subprocess.PIPE,
                    stderr=subprocess.PIPE,
                    cwd=workdir,
                    text=True,
                )
            except OSError as exc:
                raise SandboxEnvironmentError(
                    f"cannot launch interpreter {self.interpreter!r}: {exc}"
                ) from exc
            try:
                stdout, stderr = proc.communicate(timeout=timeout)
            except subprocess.TimeoutExpired:
                proc.kill()
                try:
                    proc.communicate(timeout=KILL_GRACE_SECONDS)
                except subprocess.TimeoutExpired:
                    pass
                return Verdict(
                    status=VerdictStatus.TIMEOUT,
                    detail=f"wall clock exceeded {timeout}s (workdir {workdir})",
                    duration_ms=_elapsed_ms(started),
                )
        return self._map_output(stdout, stderr, _elapsed_ms(started), workdir)

    def _map_output(self, stdout: str, stderr: str, duration_ms: int, workdir: str) -> Verdict:
        lines = [line for line in stdout.splitlines() if line.strip()]
        if not lines:
            return Verdict(
                status=VerdictStatus.ERROR,
                detail=f"shim protocol: no verdict line (stderr: {stderr.strip()[:200]})",
                duration_ms=duration_ms,
            )
        try:
            report = json.loads(lines[-1])
            status = _SHIM_STATUS[report["status"]]
            detail = str(report.get("detail", ""))
            int(report["tests_run"])
        except (ValueError, KeyError, TypeError) as exc:
            return Verdict(
                status=VerdictStatus.ERROR,
                detail=f"shim protocol: malformed verdict line: {exc}",
                duration_ms=duration_ms,
            )
        return Verdict(status=status, detail=detail, duration_ms=duration_ms)


def _elapsed_ms(started: float) -> int:
    return int((time.monotonic() - started) * 1000)
