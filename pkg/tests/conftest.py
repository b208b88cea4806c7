from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("desk", max_examples=40, deadline=None)
settings.load_profile("desk")


def dyadic_intervals(n: int):
    """Every dyadic interval of an n-cell 1-d grid as a (start, stop) pair."""
    out = []
    size = n
    while size >= 1:
        out += [(a, a + size) for a in range(0, n, size)]
        size //= 2
    return out


def brute_maximal(f, n: int, p: float = 1.0):
    """Dyadic maximal function of a 1-d array by looping over intervals."""
    f = np.asarray(f, dtype=float)
    out = np.zeros(n)
    for a, b in dyadic_intervals(n):
        avg = np.mean(np.abs(f[a:b]) ** p) ** (1 / p)
        out[a:b] = np.maximum(out[a:b], avg)
    return out


def brute_aprs(w, p, r, s, n):
    """[w]_{p,(r,s)} over dyadic intervals with explicit exponents."""
    w = np.asarray(w, dtype=float)
    t1 = 1 / r - 1 / p
    t2 = 1 / p - 1 / s
    best = 0.0
    for a, b in dyadic_intervals(n):
        seg = w[a:b]
        left = np.mean(seg ** (-1 / t1)) ** t1 if t1 > 0 else np.max(1 / seg)
        right = np.mean(seg ** (1 / t2)) ** t2 if t2 > 0 else np.max(seg)
        best = max(best, left * right)
    return best


def all_intervals(n: int):
    return [(a, b) for a, b in itertools.combinations(range(n + 1), 2)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one summary line per acceptance criterion, printed after the run
CRITERIA: dict = {}


def record_criterion(key: str, ok: bool, detail: str = "") -> None:
    CRITERIA[key] = (ok, detail)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(CRITERIA, key=lambda k: (len(k.split()[0]), k)):
        ok, detail = CRITERIA[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
