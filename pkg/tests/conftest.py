"""Shared fixtures: the synthetic benchmark corpora and an in-process runner."""

from __future__ import annotations

import sys
from pathlib import Path

import pytest

TESTS_DIR = Path(__file__).resolve().parent
if str(TESTS_DIR) not in sys.path:
    sys.path.insert(0, str(TESTS_DIR))

from summary_repair.tasks import load_humanevalpack, load_mbpp_test  # noqa: E402

from helpers import InProcessRunner  # noqa: E402

TESTDATA = TESTS_DIR.parent / "testdata"
HEP_FILE = TESTDATA / "humanevalpack_synth.jsonl"
MBPP_FILE = TESTDATA / "mbpp_synth.jsonl"


@pytest.fixture(scope="session")
def hep_tasks():
    return load_humanevalpack(HEP_FILE)


@pytest.fixture(scope="session")
def mbpp_tasks():
    return load_mbpp_test(MBPP_FILE)


@pytest.fixture(scope="session")
def in_process_runner():
    return InProcessRunner()
