from pathlib import Path

import numpy as np
import pytest

DATA = Path(__file__).parent / "data"


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def music_wav():
    return DATA / "music_like_2s.wav"


def dense_dct(n, d):
    """Explicit atom matrix built straight from the cosine definition."""
    t = np.arange(n)[:, None]
    k = np.arange(d)[None, :]
    a = np.cos(np.pi * (2 * t + 1) * k / (2 * d))
    return a / np.linalg.norm(a, axis=0)


# criterion name -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, (ok, detail) in ACCEPTANCE.items():
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
