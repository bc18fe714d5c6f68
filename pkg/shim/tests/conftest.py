import json
import subprocess
import sys
import tempfile
from pathlib import Path

import pytest

SHIM_PATH = Path(__file__).resolve().parents[1] / "exec_shim.py"
TESTDATA = Path(__file__).resolve().parents[2] / "testdata"


def run_shim(program: str, timeout: float = 15.0) -> subprocess.CompletedProcess:
    """Run one program through the shim in a scratch directory."""
    with tempfile.TemporaryDirectory(prefix="shim-test-") as workdir:
        program_path = Path(workdir) / "program.py"
        program_path.write_text(program, encoding="utf-8")
        return subprocess.run(
            [sys.executable, str(SHIM_PATH), str(program_path)],
            capture_output=True,
            text=True,
            timeout=timeout,
            cwd=workdir,
        )


def stdout_lines(proc: subprocess.CompletedProcess) -> list[str]:
    return [line for line in proc.stdout.splitlines() if line.strip()]


def last_verdict(proc: subprocess.CompletedProcess) -> dict:
    lines = stdout_lines(proc)
    assert lines, f"no verdict line (stderr: {proc.stderr!r})"
    return json.loads(lines[-1])


def verdict_for(program: str, timeout: float = 15.0) -> dict:
    return last_verdict(run_shim(program, timeout=timeout))


def load_rows(path: Path) -> list[dict]:
    rows = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                rows.append(json.loads(line))
    return rows


@pytest.fixture(scope="session")
def hep_rows() -> list[dict]:
    return load_rows(TESTDATA / "humanevalpack_synth.jsonl")


@pytest.fixture(scope="session")
def mbpp_rows() -> list[dict]:
    return load_rows(TESTDATA / "mbpp_synth.jsonl")
