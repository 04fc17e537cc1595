"""Shared fixtures and brute-force oracles used across the test modules."""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from stopbench.core import RunMeta, RunTrace
from stopbench.kernels import available_backends, get_backend

# The worked example of a 4-member population, one offspring per iteration.
WORKED_FX = np.array([
    [1.78, 2.53],
    [3.14, 2.91],
    [0.26, 4.55],
    [2.88, 0.98],
    [1.27, 2.55],
    [1.45, 2.39],
])
WORKED_IDS = np.array([[1, 2, 3, 4], [1, 2, 5, 4], [6, 2, 5, 4]])
WORKED_NAIVE = (
    "1.78,2.53\n3.14,2.91\n0.26,4.55\n2.88,0.98\n",
    "1.78,2.53\n3.14,2.91\n1.27,2.55\n2.88,0.98\n",
    "1.45,2.39\n3.14,2.91\n1.27,2.55\n2.88,0.98\n",
)


def worked_trace(encoding: str = "text") -> RunTrace:
    meta = RunMeta(m=2, mu=4, lam=1, t_max=3, problem_id="dtlz2",
                   algorithm_id="worked", seed=0, encoding=encoding)
    return RunTrace(meta, WORKED_FX, WORKED_IDS)


@pytest.fixture
def worked():
    return worked_trace()


@pytest.fixture(params=available_backends())
def backend(request):
    return get_backend(request.param)


# ---- oracles ---------------------------------------------------------------

def brute_dominates(a, b):
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


def brute_nondominated(points):
    pts = [tuple(p) for p in points]
    return [p for p in pts if not any(brute_dominates(q, p) for q in pts)]


def brute_fronts(points):
    """Front-peeling ranks, 0-based."""
    remaining = set(range(len(points)))
    ranks = [0] * len(points)
    r = 0
    while remaining:
        front = [i for i in remaining
                 if not any(brute_dominates(points[j], points[i]) for j in remaining)]
        for i in front:
            ranks[i] = r
        remaining -= set(front)
        r += 1
    return ranks


def inclusion_exclusion_hv(points, ref):
    """Union volume of boxes ``[p, ref]`` by inclusion-exclusion; exponential."""
    pts = [np.minimum(np.asarray(p, float), ref) for p in points]
    pts = [p for p in pts if np.all(p < ref)]
    total = 0.0
    for k in range(1, len(pts) + 1):
        sign = 1.0 if k % 2 else -1.0
        for combo in itertools.combinations(pts, k):
            corner = np.max(combo, axis=0)
            total += sign * float(np.prod(np.asarray(ref) - corner))
    return total


def monte_carlo_hv(points, ref, n, rng):
    """Estimate and standard error of the dominated volume inside ``[0, ref]``."""
    P = np.asarray(points, float)
    ref = np.asarray(ref, float)
    vol = float(np.prod(ref))
    hits = 0
    chunk = 100_000
    for start in range(0, n, chunk):
        S = rng.random((min(chunk, n - start), P.shape[1])) * ref
        dom = np.zeros(S.shape[0], dtype=bool)
        for p in P:
            dom |= np.all(S >= p, axis=1)
        hits += int(dom.sum())
    frac = hits / n
    return vol * frac, vol * math.sqrt(frac * (1 - frac) / n)


# ---- acceptance verdict lines -----------------------------------------------

ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        line = f"[{'PASS' if ok else 'FAIL'}] {n:2d}. {title}"
        terminalreporter.write_line(line + (f" ({detail})" if detail else ""))
