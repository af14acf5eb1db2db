# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled shortest-augmenting-path kernel for the dense rectangular LAP.

Twin of ``_jv_py.lapjv``: same operation order, same first-index tie rule,
bit-identical matchings. Keep both kernels in sync.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

KERNEL_NAME = "cython"


def lapjv(cost):
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    cdef Py_ssize_t m = cost.shape[0]
    cdef Py_ssize_t n = cost.shape[1]
    if m > n:
        raise ValueError(f"lapjv needs m <= n, got {m}x{n}")
    if not np.all(np.isfinite(cost)):
        raise ValueError("lapjv: cost matrix contains non-finite entries")

    cdef const double[:, ::1] c = cost
    u_arr = np.zeros(m)
    v_arr = np.zeros(n)
    col4row_arr = np.full(m, -1, dtype=np.intp)
    row4col_arr = np.full(n, -1, dtype=np.intp)
    shortest_arr = np.empty(n)
    pred_arr = np.empty(n, dtype=np.intp)
    done_arr = np.empty(n, dtype=np.uint8)

    cdef double[::1] u = u_arr
    cdef double[::1] v = v_arr
    cdef Py_ssize_t[::1] col4row = col4row_arr
    cdef Py_ssize_t[::1] row4col = row4col_arr
    cdef double[::1] shortest = shortest_arr
    cdef Py_ssize_t[::1] pred = pred_arr
    cdef unsigned char[::1] done = done_arr

    cdef Py_ssize_t cur, i, j, jmin, sink, tmp
    cdef double minval, r, lowest
    cdef double inf = np.inf

    for cur in range(m):
        for j in range(n):
            shortest[j] = inf
            pred[j] = cur
            done[j] = 0
        minval = 0.0
        i = cur
        sink = -1
        while sink == -1:
            lowest = inf
            jmin = -1
            for j in range(n):
                if done[j]:
                    continue
                r = (minval + c[i, j]) - u[i] - v[j]
                if r < shortest[j]:
                    shortest[j] = r
                    pred[j] = i
                if shortest[j] < lowest:
                    lowest = shortest[j]
                    jmin = j
            minval = lowest
            if jmin < 0 or minval == inf:
                raise ValueError("lapjv: no augmenting path (non-finite costs?)")
            done[jmin] = 1
            if row4col[jmin] < 0:
                sink = jmin
            else:
                i = row4col[jmin]

        u[cur] += minval
        for j in range(n):
            if done[j]:
                if j != sink:
                    u[row4col[j]] += minval - shortest[j]
                v[j] -= minval - shortest[j]

        j = sink
        while True:
            i = pred[j]
            row4col[j] = i
            tmp = col4row[i]
            col4row[i] = j
            j = tmp
            if i == cur:
                break

    return col4row_arr, row4col_arr
