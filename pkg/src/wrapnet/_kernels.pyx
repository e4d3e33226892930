# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Signatures mirror ``wrapnet._pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY, sqrt

cnp.import_array()


def lsap(const double[:, ::1] cost):
    """Square min-cost assignment (shortest augmenting paths with potentials).

    Returns ``(col4row, u, v)`` with ``u[i] + v[j] <= cost[i, j]`` and
    equality on every assigned pair.
    """
    cdef Py_ssize_t n = cost.shape[0]
    if cost.shape[1] != n:
        raise ValueError("lsap expects a square matrix")
    cdef double[::1] u = np.zeros(n + 1)
    cdef double[::1] v = np.zeros(n + 1)
    cdef double[::1] minv = np.empty(n + 1)
    cdef Py_ssize_t[::1] p = np.zeros(n + 1, dtype=np.intp)
    cdef Py_ssize_t[::1] way = np.zeros(n + 1, dtype=np.intp)
    cdef unsigned char[::1] used = np.zeros(n + 1, dtype=np.uint8)
    cdef Py_ssize_t i, j, j0, j1, i0
    cdef double delta, cur
    with nogil:
        for i in range(1, n + 1):
            p[0] = i
            j0 = 0
            for j in range(n + 1):
                minv[j] = INFINITY
                used[j] = 0
            while True:
                used[j0] = 1
                i0 = p[j0]
                delta = INFINITY
                j1 = 0
                for j in range(1, n + 1):
                    if not used[j]:
                        cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                        if cur < minv[j]:
                            minv[j] = cur
                            way[j] = j0
                        if minv[j] < delta:
                            delta = minv[j]
                            j1 = j
                for j in range(n + 1):
                    if used[j]:
                        u[p[j]] += delta
                        v[j] -= delta
                    else:
                        minv[j] -= delta
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
    cdef long long[::1] c4r = col4row
    for j in range(1, n + 1):
        c4r[p[j] - 1] = j - 1
    return col4row, np.asarray(u[1:]).copy(), np.asarray(v[1:]).copy()


def nearest(const double[:, ::1] a, const double[:, ::1] b):
    """For every row of ``a``: index of the closest row of ``b`` (lowest index on
    ties) and the squared distance ``(dx*dx + dy*dy) + dz*dz``."""
    cdef Py_ssize_t na = a.shape[0], nb = b.shape[0], i, j
    idx = np.empty(na, dtype=np.int64)
    dist = np.empty(na)
    cdef long long[::1] out_i = idx
    cdef double[::1] out_d = dist
    cdef double best, d, dx, dy, dz
    cdef long long bj
    with nogil:
        for i in range(na):
            best = INFINITY
            bj = -1
            for j in range(nb):
                dx = a[i, 0] - b[j, 0]
                dy = a[i, 1] - b[j, 1]
                dz = a[i, 2] - b[j, 2]
                d = dx * dx + dy * dy
                d = d + dz * dz
                if d < best:
                    best = d
                    bj = j
            out_i[i] = bj
            out_d[i] = best
    return idx, dist


def adam_update(double[::1] p, const double[::1] g, double[::1] m, double[::1] v,
                double lr, double beta1, double beta2, double eps, double c1, double c2):
    """In-place bias-corrected Adam on flat arrays; entries with ``g == 0`` keep ``p``."""
    cdef Py_ssize_t k, n = p.shape[0]
    cdef double gk, step
    cdef double a1 = 1.0 - beta1, a2 = 1.0 - beta2, inv_c2 = 1.0 / c2, scale = lr / c1
    if g.shape[0] != n or m.shape[0] != n or v.shape[0] != n:
        raise ValueError("adam_update arrays differ in length")
    with nogil:
        for k in range(n):
            gk = g[k]
            m[k] = m[k] * beta1 + a1 * gk
            v[k] = v[k] * beta2 + (gk * gk) * a2
            if gk != 0.0:
                step = (m[k] / (sqrt(v[k] * inv_c2) + eps)) * scale
                p[k] = p[k] - step


def scatter_add_rows(double[:, ::1] out, const cnp.int64_t[::1] idx, const double[:, ::1] rows):
    """``out[idx[k]] += rows[k]`` for every ``k`` in ascending order."""
    cdef Py_ssize_t k, c, r, n = idx.shape[0], d = out.shape[1], n_out = out.shape[0]
    if rows.shape[0] != n or rows.shape[1] != d:
        raise ValueError("scatter_add_rows shape mismatch")
    for k in range(n):
        if idx[k] < 0 or idx[k] >= n_out:
            raise IndexError("scatter index out of range")
    with nogil:
        for k in range(n):
            r = idx[k]
            for c in range(d):
                out[r, c] = out[r, c] + rows[k, c]


cdef inline double _sum3(double a, double b, double c) noexcept nogil:
    # ascending-order sum of three values, matching sort-then-add exactly
    cdef double lo = a if a < b else b
    cdef double hi = b if a < b else a
    cdef double small = lo if lo < c else c
    cdef double big = hi if hi > c else c
    cdef double mid = hi if hi < c else c
    if lo > mid:
        mid = lo
    return (small + mid) + big


cdef inline double _sgn(double x) noexcept nogil:
    return (x > 0) - (x < 0)


def face_conv_stack(const double[:, ::1] F, const cnp.int64_t[:, ::1] adj):
    """Rows ``[F_i, sum F_j, sum |F_{j+1}-F_j|, sum |F_i-F_j|]`` over the three neighbors ``j``."""
    cdef Py_ssize_t m = F.shape[0], d = F.shape[1], i, c
    if adj.shape[0] != m or adj.shape[1] != 3:
        raise ValueError("adjacency must be (m, 3)")
    for i in range(m):
        for c in range(3):
            if adj[i, c] < 0 or adj[i, c] >= m:
                raise IndexError("adjacency index out of range")
    out = np.empty((m, 4 * d))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t n0, n1, n2
    cdef double f, a, b, z
    with nogil:
        for i in range(m):
            n0, n1, n2 = adj[i, 0], adj[i, 1], adj[i, 2]
            for c in range(d):
                f, a, b, z = F[i, c], F[n0, c], F[n1, c], F[n2, c]
                o[i, c] = f
                o[i, d + c] = _sum3(a, b, z)
                o[i, 2 * d + c] = _sum3(abs(b - a), abs(z - b), abs(a - z))
                o[i, 3 * d + c] = _sum3(abs(f - a), abs(f - b), abs(f - z))
    return out


def face_conv_stack_back(const double[:, ::1] G, const double[:, ::1] F, const cnp.int64_t[:, ::1] adj):
    """Gradient of :func:`face_conv_stack` with respect to ``F``.

    Contributions are added face by face in the order center, neighbor 0, 1, 2.
    """
    cdef Py_ssize_t m = F.shape[0], d = F.shape[1], i, c
    if G.shape[0] != m or G.shape[1] != 4 * d or adj.shape[0] != m or adj.shape[1] != 3:
        raise ValueError("face_conv_stack_back shape mismatch")
    for i in range(m):
        for c in range(3):
            if adj[i, c] < 0 or adj[i, c] >= m:
                raise IndexError("adjacency index out of range")
    out = np.zeros((m, d))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t n0, n1, n2
    cdef double f, a, b, z, g1, g2, g3, r0, r1, r2, q0, q1, q2
    with nogil:
        for i in range(m):
            n0, n1, n2 = adj[i, 0], adj[i, 1], adj[i, 2]
            for c in range(d):
                f, a, b, z = F[i, c], F[n0, c], F[n1, c], F[n2, c]
                g1, g2, g3 = G[i, d + c], G[i, 2 * d + c], G[i, 3 * d + c]
                r0, r1, r2 = _sgn(b - a), _sgn(z - b), _sgn(a - z)
                q0, q1, q2 = _sgn(f - a), _sgn(f - b), _sgn(f - z)
                o[i, c] = o[i, c] + (G[i, c] + g3 * ((q0 + q1) + q2))
                o[n0, c] = o[n0, c] + ((g1 + g2 * (r2 - r0)) - g3 * q0)
                o[n1, c] = o[n1, c] + ((g1 + g2 * (r0 - r1)) - g3 * q1)
                o[n2, c] = o[n2, c] + ((g1 + g2 * (r1 - r2)) - g3 * q2)
    return out
