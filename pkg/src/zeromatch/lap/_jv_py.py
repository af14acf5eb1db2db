"""Pure-Python shortest-augmenting-path kernel for the dense rectangular LAP.

This is the fallback twin of the compiled kernel in ``_jv_cy.pyx``. Both
implementations perform the same floating-point operations in the same order
and share one tie rule (first column index wins), so they return identical
matchings bit for bit. Keep them in sync.
"""

import numpy as np

KERNEL_NAME = "python"


def lapjv(cost):
    """Solve min-cost complete assignment of rows of an m x n matrix, m <= n.

    Returns (col4row, row4col): col4row[i] is the column matched to row i,
    row4col[j] is the row matched to column j or -1.
    """
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    m, n = cost.shape
    if m > n:
        raise ValueError(f"lapjv needs m <= n, got {m}x{n}")
    if not np.all(np.isfinite(cost)):
        raise ValueError("lapjv: cost matrix contains non-finite entries")

    u = np.zeros(m)
    v = np.zeros(n)
    col4row = np.full(m, -1, dtype=np.intp)
    row4col = np.full(n, -1, dtype=np.intp)
    shortest = np.empty(n)
    pred = np.empty(n, dtype=np.intp)
    done = np.empty(n, dtype=bool)

    for cur in range(m):
        shortest[:] = np.inf
        pred[:] = cur
        done[:] = False
        minval = 0.0
        i = cur
        sink = -1
        while sink == -1:
            # relax undone columns from row i; op order matches the C kernel
            r = (minval + cost[i]) - u[i] - v
            better = ~done & (r < shortest)
            shortest[better] = r[better]
            pred[better] = i
            idx = np.flatnonzero(~done)
            jmin = idx[np.argmin(shortest[idx])]
            minval = shortest[jmin]
            if not np.isfinite(minval):
                raise ValueError("lapjv: no augmenting path (non-finite costs?)")
            done[jmin] = True
            if row4col[jmin] < 0:
                sink = jmin
            else:
                i = row4col[jmin]

        u[cur] += minval
        scanned = np.flatnonzero(done)
        for j in scanned:
            if j != sink:
                u[row4col[j]] += minval - shortest[j]
        v[scanned] -= minval - shortest[scanned]

        # augment along the alternating path back to cur
        j = sink
        while True:
            i = pred[j]
            row4col[j] = i
            col4row[i], j = j, col4row[i]
            if i == cur:
                break

    return col4row, row4col
