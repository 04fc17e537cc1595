# cython: language_level=3
"""Compiled kernels: non-dominated sorting, crowding distance, dominance
counting and exact WFG hypervolume.

Mirrors :mod:`stopbench._pykernels` function for function.
"""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free
from libc.math cimport INFINITY

cnp.import_array()

NAME = "cython"


cdef inline bint _dom(const double* a, const double* b, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t k
    cdef bint strict = False
    for k in range(m):
        if a[k] > b[k]:
            return False
        if a[k] < b[k]:
            strict = True
    return strict


cdef inline bint _weak(const double* a, const double* b, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t k
    for k in range(m):
        if a[k] > b[k]:
            return False
    return True


cdef inline bint _equal(const double* a, const double* b, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t k
    for k in range(m):
        if a[k] != b[k]:
            return False
    return True


def nondominated_mask(F):
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] X = np.ascontiguousarray(F, dtype=np.float64)
    cdef Py_ssize_t n = X.shape[0], m = X.shape[1], i, j
    out = np.ones(n, dtype=bool)
    cdef cnp.uint8_t[:] keep = out.view(np.uint8)
    cdef double* base = <double*> X.data
    with nogil:
        for i in range(n):
            for j in range(n):
                if i != j and _dom(base + j * m, base + i * m, m):
                    keep[i] = 0
                    break
    return out


def nondominated_sort(F):
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] X = np.ascontiguousarray(F, dtype=np.float64)
    cdef Py_ssize_t n = X.shape[0], m = X.shape[1], i, j, k, head, tail, nxt_tail
    ranks_arr = np.zeros(n, dtype=np.int64)
    if n == 0:
        return ranks_arr
    cdef cnp.int64_t[:] ranks = ranks_arr
    cdef double* base = <double*> X.data
    # dominated[i*n + c] lists rows dominated by i; ndom[i] = number of rows dominating i
    cdef Py_ssize_t* dominated = <Py_ssize_t*> malloc(n * n * sizeof(Py_ssize_t))
    cdef Py_ssize_t* ndominated = <Py_ssize_t*> malloc(n * sizeof(Py_ssize_t))
    cdef Py_ssize_t* count = <Py_ssize_t*> malloc(n * sizeof(Py_ssize_t))
    cdef Py_ssize_t* queue = <Py_ssize_t*> malloc(n * sizeof(Py_ssize_t))
    cdef Py_ssize_t rank = 0, q
    if not dominated or not ndominated or not count or not queue:
        free(dominated); free(ndominated); free(count); free(queue)
        raise MemoryError()
    with nogil:
        for i in range(n):
            ndominated[i] = 0
            count[i] = 0
        for i in range(n):
            for j in range(i + 1, n):
                if _dom(base + i * m, base + j * m, m):
                    dominated[i * n + ndominated[i]] = j
                    ndominated[i] += 1
                    count[j] += 1
                elif _dom(base + j * m, base + i * m, m):
                    dominated[j * n + ndominated[j]] = i
                    ndominated[j] += 1
                    count[i] += 1
        tail = 0
        for i in range(n):
            if count[i] == 0:
                queue[tail] = i
                tail += 1
        head = 0
        while head < tail:
            nxt_tail = tail
            for k in range(head, tail):
                i = queue[k]
                ranks[i] = rank
                for j in range(ndominated[i]):
                    q = dominated[i * n + j]
                    count[q] -= 1
                    if count[q] == 0:
                        queue[nxt_tail] = q
                        nxt_tail += 1
            head = tail
            tail = nxt_tail
            rank += 1
    free(dominated); free(ndominated); free(count); free(queue)
    return ranks_arr


def crowding_distance(F):
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] X = np.ascontiguousarray(F, dtype=np.float64)
    cdef Py_ssize_t n = X.shape[0], m = X.shape[1], j, i
    out = np.zeros(n, dtype=np.float64)
    if n <= 2:
        out[:] = np.inf
        return out
    cdef double[:] dist = out
    cdef cnp.int64_t[:] order
    cdef double span, lo, hi
    for j in range(m):
        # stable sort keeps tie-breaking identical to the numpy fallback
        order = np.argsort(X[:, j], kind="stable")
        lo = X[order[0], j]
        hi = X[order[n - 1], j]
        span = hi - lo
        dist[order[0]] = INFINITY
        dist[order[n - 1]] = INFINITY
        if span > 0.0:
            for i in range(1, n - 1):
                dist[order[i]] += (X[order[i + 1], j] - X[order[i - 1], j]) / span
    return out


def dominated_count(A, B):
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] XA = np.ascontiguousarray(A, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] XB = np.ascontiguousarray(B, dtype=np.float64)
    cdef Py_ssize_t na = XA.shape[0], nb = XB.shape[0], m = XA.shape[1], i, j
    cdef Py_ssize_t total = 0
    if na == 0 or nb == 0:
        return 0
    cdef double* a = <double*> XA.data
    cdef double* b = <double*> XB.data
    with nogil:
        for i in range(na):
            for j in range(nb):
                if _dom(b + j * m, a + i * m, m):
                    total += 1
                    break
    return total


# ---- hypervolume -------------------------------------------------------

cdef double _box(const double* p, const double* ref, Py_ssize_t m) noexcept nogil:
    cdef double v = 1.0
    cdef Py_ssize_t k
    for k in range(m):
        v *= ref[k] - p[k]
    return v


cdef void _sort_rows(double* P, Py_ssize_t n, Py_ssize_t m, Py_ssize_t key,
                     bint descending, double* tmp) noexcept nogil:
    # insertion sort on one column; n is small (a population)
    cdef Py_ssize_t i, j, k
    cdef double v
    for i in range(1, n):
        for k in range(m):
            tmp[k] = P[i * m + k]
        v = tmp[key]
        j = i - 1
        while j >= 0 and ((P[j * m + key] < v) if descending else (P[j * m + key] > v)):
            for k in range(m):
                P[(j + 1) * m + k] = P[j * m + k]
            j -= 1
        for k in range(m):
            P[(j + 1) * m + k] = tmp[k]


cdef double _hv2d(double* P, Py_ssize_t n, const double* ref, double* tmp) noexcept nogil:
    # sort by x then y, sweep keeping the running minimum of y
    cdef Py_ssize_t i
    cdef double total = 0.0, cur_y = ref[1]
    _sort_rows(P, n, 2, 1, False, tmp)
    _sort_rows(P, n, 2, 0, False, tmp)
    for i in range(n):
        if P[i * 2 + 1] < cur_y:
            total += (ref[0] - P[i * 2]) * (cur_y - P[i * 2 + 1])
            cur_y = P[i * 2 + 1]
    return total


cdef Py_ssize_t _weak_filter(double* P, Py_ssize_t n, Py_ssize_t m) noexcept nogil:
    # compact P in place to rows not weakly dominated by another row
    cdef Py_ssize_t i, j, k, out = 0
    cdef bint drop
    for i in range(n):
        drop = False
        for j in range(n):
            if i == j:
                continue
            if _weak(P + j * m, P + i * m, m):
                if not _equal(P + j * m, P + i * m, m) or j < i:
                    drop = True
                    break
        if not drop:
            if out != i:
                for k in range(m):
                    P[out * m + k] = P[i * m + k]
            out += 1
    # reads may hit moved copies of kept rows; kept rows are never lost
    return out


cdef double _wfg(double* P, Py_ssize_t n, Py_ssize_t m, const double* ref) noexcept nogil:
    cdef Py_ssize_t i, j, k, nl
    cdef double total = 0.0, excl
    cdef double* lim
    cdef double* tmp
    if n == 0:
        return 0.0
    if n == 1:
        return _box(P, ref, m)
    tmp = <double*> malloc(m * sizeof(double))
    if m == 2:
        total = _hv2d(P, n, ref, tmp)
        free(tmp)
        return total
    _sort_rows(P, n, m, m - 1, True, tmp)
    free(tmp)
    lim = <double*> malloc(n * m * sizeof(double))
    for i in range(n):
        excl = _box(P + i * m, ref, m)
        nl = n - i - 1
        if nl > 0:
            for j in range(nl):
                for k in range(m):
                    lim[j * m + k] = P[(i + 1 + j) * m + k] if P[(i + 1 + j) * m + k] > P[i * m + k] else P[i * m + k]
            nl = _weak_filter(lim, nl, m)
            excl -= _wfg(lim, nl, m, ref)
        total += excl
    free(lim)
    return total


def hypervolume(F, ref):
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] X = np.ascontiguousarray(F, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] R = np.ascontiguousarray(ref, dtype=np.float64)
    if X.shape[0] == 0:
        return 0.0
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] P = np.ascontiguousarray(X[np.all(X < R, axis=1)])
    cdef Py_ssize_t n = P.shape[0], m = P.shape[1]
    cdef double result
    if n == 0:
        return 0.0
    with nogil:
        n = _weak_filter(<double*> P.data, n, m)
        result = _wfg(<double*> P.data, n, m, <double*> R.data)
    return result
