"""Pure numpy implementations of the hot kernels.

These are the reference fallback for :mod:`stopbench._ckernels`; both modules
expose the same five functions with the same semantics. Inputs are float64
arrays of shape ``(n, m)`` in minimization form.
"""

import numpy as np

NAME = "python"


def _dominance_matrix(F):
    # dom[i, j] is True when row i Pareto-dominates row j
    le = np.all(F[:, None, :] <= F[None, :, :], axis=2)
    lt = np.any(F[:, None, :] < F[None, :, :], axis=2)
    return le & lt


def nondominated_mask(F):
    """Mask of rows not dominated by any other row. Duplicates are all kept."""
    F = np.ascontiguousarray(F, dtype=np.float64)
    if F.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    return ~_dominance_matrix(F).any(axis=0)


def nondominated_sort(F):
    """Return the 0-based non-domination rank of every row."""
    F = np.ascontiguousarray(F, dtype=np.float64)
    n = F.shape[0]
    ranks = np.zeros(n, dtype=np.int64)
    if n == 0:
        return ranks
    dom = _dominance_matrix(F)
    counts = dom.sum(axis=0)
    current = np.flatnonzero(counts == 0)
    rank = 0
    while current.size:
        ranks[current] = rank
        counts = counts - dom[current].sum(axis=0)
        counts[current] = -1
        current = np.flatnonzero(counts == 0)
        rank += 1
    return ranks


def crowding_distance(F):
    """NSGA-II crowding distance of the rows of a single front.

    Boundary rows get ``inf``; an objective with zero spread adds nothing.
    Sorting is stable so ties resolve by row order.
    """
    F = np.ascontiguousarray(F, dtype=np.float64)
    n, m = F.shape
    dist = np.zeros(n, dtype=np.float64)
    if n <= 2:
        dist[:] = np.inf
        return dist
    for j in range(m):
        order = np.argsort(F[:, j], kind="stable")
        col = F[order, j]
        span = col[-1] - col[0]
        dist[order[0]] = np.inf
        dist[order[-1]] = np.inf
        if span > 0.0:
            dist[order[1:-1]] += (col[2:] - col[:-2]) / span
    return dist


def dominated_count(A, B):
    """Number of rows of ``A`` dominated by at least one row of ``B``."""
    A = np.ascontiguousarray(A, dtype=np.float64)
    B = np.ascontiguousarray(B, dtype=np.float64)
    if A.shape[0] == 0 or B.shape[0] == 0:
        return 0
    le = np.all(B[:, None, :] <= A[None, :, :], axis=2)
    lt = np.any(B[:, None, :] < A[None, :, :], axis=2)
    return int((le & lt).any(axis=0).sum())


def _hv2d(P, ref):
    order = np.lexsort((P[:, 1], P[:, 0]))
    total = 0.0
    cur_y = ref[1]
    for k in order:
        x, y = P[k]
        if y < cur_y:
            total += (ref[0] - x) * (cur_y - y)
            cur_y = y
    return total


def _weak_filter(P):
    # drop rows weakly dominated by another row; of equal rows keep the first
    n = P.shape[0]
    le = np.all(P[:, None, :] <= P[None, :, :], axis=2)
    eq = np.all(P[:, None, :] == P[None, :, :], axis=2)
    np.fill_diagonal(le, False)
    strict = le & ~eq
    earlier_dup = np.triu(eq, k=1)
    drop = strict.any(axis=0) | earlier_dup.any(axis=0)
    return P[~drop] if n else P


def _wfg(P, ref):
    n, m = P.shape
    if n == 0:
        return 0.0
    if n == 1:
        return float(np.prod(ref - P[0]))
    if m == 2:
        return _hv2d(P, ref)
    P = P[np.argsort(P[:, -1], kind="stable")[::-1]]
    total = 0.0
    for i in range(n):
        p = P[i]
        excl = float(np.prod(ref - p))
        rest = P[i + 1:]
        if rest.shape[0]:
            lim = _weak_filter(np.maximum(rest, p))
            excl -= _wfg(lim, ref)
        total += excl
    return total


def hypervolume(F, ref):
    """Exact hypervolume of ``F`` bounded by ``ref``.

    Rows not strictly better than ``ref`` in every coordinate add no volume
    and are discarded up front.
    """
    F = np.ascontiguousarray(F, dtype=np.float64)
    ref = np.ascontiguousarray(ref, dtype=np.float64)
    if F.shape[0] == 0:
        return 0.0
    P = F[np.all(F < ref, axis=1)]
    if P.shape[0] == 0:
        return 0.0
    return _wfg(_weak_filter(P), ref)
