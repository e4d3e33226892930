"""Pure-Python (numpy) versions of the compiled kernels in ``_kernels.pyx``."""

import numpy as np


def lsap(cost):
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    n = cost.shape[0]
    if cost.shape != (n, n):
        raise ValueError("lsap expects a square matrix")
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)
    way = np.zeros(n + 1, dtype=np.int64)
    padded = np.zeros((n + 1, n + 1))
    padded[1:, 1:] = cost
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        used[0] = True  # column 0 is the virtual source
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used
            cur = padded[i0] - u[i0] - v
            better = free & (cur < minv)
            minv[better] = cur[better]
            way[better] = j0
            cand = np.where(free, minv, np.inf)
            j1 = int(np.argmin(cand))
            delta = cand[j1]
            u[p[used]] += delta
            v[used] -= delta
            minv[free] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    col4row = np.empty(n, dtype=np.int64)
    col4row[p[1:] - 1] = np.arange(n)
    return col4row, u[1:].copy(), v[1:].copy()


def nearest(a, b):
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    idx = np.empty(len(a), dtype=np.int64)
    dist = np.empty(len(a))
    step = max(1, 2_000_000 // max(1, len(b)))
    for s in range(0, len(a), step):
        d = a[s:s + step, None, :] - b[None, :, :]
        sq = d[..., 0] * d[..., 0] + d[..., 1] * d[..., 1]
        sq = sq + d[..., 2] * d[..., 2]
        j = np.argmin(sq, axis=1)
        idx[s:s + step] = j
        dist[s:s + step] = sq[np.arange(len(j)), j]
    return idx, dist


def adam_update(p, g, m, v, lr, beta1, beta2, eps, c1, c2):
    """In-place bias-corrected Adam on flat arrays; entries with ``g == 0`` keep ``p``."""
    if not (len(g) == len(m) == len(v) == len(p)):
        raise ValueError("adam_update arrays differ in length")
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (g * g) * (1.0 - beta2)
    step = np.sqrt(v * (1.0 / c2))
    step += eps
    np.divide(m, step, out=step)
    step *= lr / c1
    nz = g != 0.0
    p[nz] -= step[nz]


def scatter_add_rows(out, idx, rows):
    """``out[idx[k]] += rows[k]`` for every ``k`` in ascending order."""
    if rows.shape != (len(idx), out.shape[1]):
        raise ValueError("scatter_add_rows shape mismatch")
    if len(idx) and (idx.min() < 0 or idx.max() >= len(out)):
        raise IndexError("scatter index out of range")
    np.add.at(out, idx, rows)


def _sum3(a, b, c):
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    mid = np.maximum(lo, np.minimum(hi, c))
    return (np.minimum(lo, c) + mid) + np.maximum(hi, c)


def _check_adj(adj, m):
    if adj.shape != (m, 3):
        raise ValueError("adjacency must be (m, 3)")
    if m and (adj.min() < 0 or adj.max() >= m):
        raise IndexError("adjacency index out of range")


def face_conv_stack(F, adj):
    """Rows ``[F_i, sum F_j, sum |F_{j+1}-F_j|, sum |F_i-F_j|]`` over the three neighbors ``j``."""
    _check_adj(adj, len(F))
    a, b, z = F[adj[:, 0]], F[adj[:, 1]], F[adj[:, 2]]
    return np.concatenate([
        F, _sum3(a, b, z),
        _sum3(np.abs(b - a), np.abs(z - b), np.abs(a - z)),
        _sum3(np.abs(F - a), np.abs(F - b), np.abs(F - z)),
    ], axis=1)


def face_conv_stack_back(G, F, adj):
    m, d = F.shape
    if G.shape != (m, 4 * d):
        raise ValueError("face_conv_stack_back shape mismatch")
    _check_adj(adj, m)
    a, b, z = F[adj[:, 0]], F[adj[:, 1]], F[adj[:, 2]]
    g1, g2, g3 = G[:, d:2 * d], G[:, 2 * d:3 * d], G[:, 3 * d:]
    r0, r1, r2 = np.sign(b - a), np.sign(z - b), np.sign(a - z)
    q0, q1, q2 = np.sign(F - a), np.sign(F - b), np.sign(F - z)
    contrib = np.stack([
        G[:, :d] + g3 * ((q0 + q1) + q2),
        (g1 + g2 * (r2 - r0)) - g3 * q0,
        (g1 + g2 * (r0 - r1)) - g3 * q1,
        (g1 + g2 * (r1 - r2)) - g3 * q2,
    ], axis=1).reshape(4 * m, d)
    idx = np.concatenate([np.arange(m)[:, None], adj], axis=1).reshape(-1)
    out = np.zeros((m, d))
    np.add.at(out, idx, contrib)
    return out
