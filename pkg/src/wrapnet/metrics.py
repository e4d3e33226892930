"""Point-based reconstruction metrics: Chamfer distance, normals error, curvature preservation.

All three are symmetric two-sided means over nearest-neighbor pairs; means are
accumulated with ``math.fsum`` so they do not depend on point order.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .mesh import Mesh, vertex_normals


@dataclass(frozen=True)
class PointSet:
    points: np.ndarray
    normals: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "points", np.ascontiguousarray(self.points, dtype=np.float64))
        if self.normals is not None:
            object.__setattr__(self, "normals", np.ascontiguousarray(self.normals, dtype=np.float64))


def _pts(s) -> np.ndarray:
    p = s.points if isinstance(s, PointSet) else np.ascontiguousarray(s, dtype=np.float64)
    if p.ndim != 2 or p.shape[1] != 3:
        raise ValueError(f"expected (k, 3) points, got {p.shape}")
    if len(p) == 0:
        raise ValueError("point set is empty")
    return p


def _mean(x) -> float:
    return math.fsum(x) / len(x)


def nearest_neighbors(a, b):
    """Index into ``b`` of each point of ``a`` (lowest index on ties) and the squared distance."""
    return kernels.nearest(_pts(a), _pts(b))


def chamfer(s1, s2) -> float:
    a, b = _pts(s1), _pts(s2)
    _, d_ab = kernels.nearest(a, b)
    _, d_ba = kernels.nearest(b, a)
    return _mean(d_ab) + _mean(d_ba)


def _cos_terms(n_src, n_dst, idx):
    ns = np.sqrt(n_src[:, 0] * n_src[:, 0] + n_src[:, 1] * n_src[:, 1] + n_src[:, 2] * n_src[:, 2])
    nd = np.sqrt(n_dst[:, 0] * n_dst[:, 0] + n_dst[:, 1] * n_dst[:, 1] + n_dst[:, 2] * n_dst[:, 2])
    if np.any(ns == 0) or np.any(nd == 0):
        raise ValueError("zero-norm normal")
    dst = n_dst[idx]
    dot = n_src[:, 0] * dst[:, 0] + n_src[:, 1] * dst[:, 1] + n_src[:, 2] * dst[:, 2]
    return 1.0 - dot / (ns * nd[idx])


def normals_error(s1: PointSet, s2: PointSet, k: int = 15) -> float:
    """Two-sided mean of ``1 - cos`` between normals at nearest-neighbor pairs.

    Missing normals are estimated from ``k``-neighborhood covariance.
    """
    a, b = _pts(s1), _pts(s2)
    n1 = s1.normals if isinstance(s1, PointSet) and s1.normals is not None else estimate_normals_curvature(a, k)[0]
    n2 = s2.normals if isinstance(s2, PointSet) and s2.normals is not None else estimate_normals_curvature(b, k)[0]
    i_ab, _ = kernels.nearest(a, b)
    i_ba, _ = kernels.nearest(b, a)
    return _mean(_cos_terms(n1, n2, i_ab)) + _mean(_cos_terms(n2, n1, i_ba))


def knn_indices(points: np.ndarray, k: int) -> np.ndarray:
    """``k`` nearest points (the point itself included), ties by lowest index."""
    p = _pts(points)
    if k > len(p):
        raise ValueError(f"k={k} exceeds point count {len(p)}")
    out = np.empty((len(p), k), dtype=np.int64)
    step = max(1, 4_000_000 // len(p))
    for s in range(0, len(p), step):
        d = p[s:s + step, None, :] - p[None, :, :]
        sq = d[..., 0] * d[..., 0] + d[..., 1] * d[..., 1] + d[..., 2] * d[..., 2]
        out[s:s + step] = np.argsort(sq, axis=1, kind="stable")[:, :k]
    return out


def estimate_normals_curvature(points, k: int = 15):
    """Covariance-based normals and surface variation ``l_min / (l0 + l1 + l2)``.

    Normals are flipped to point away from the centroid of the whole set.
    """
    p = _pts(points)
    nb = p[knn_indices(p, k)]  # (n, k, 3)
    centered = nb - nb.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered) / k
    w, vecs = np.linalg.eigh(cov)
    w = np.maximum(w, 0.0)
    normals = vecs[:, :, 0]
    out_dir = p - p.mean(axis=0)
    flip = (normals * out_dir).sum(axis=1) < 0
    normals[flip] *= -1.0
    tot = w.sum(axis=1)
    curv = np.divide(w[:, 0], tot, out=np.zeros(len(p)), where=tot > 0)
    return normals, curv


def curvature_preservation(s1, s2, k: int = 15, curv1=None, curv2=None) -> float:
    """Two-sided mean absolute curvature difference at nearest-neighbor pairs."""
    a, b = _pts(s1), _pts(s2)
    c1 = estimate_normals_curvature(a, k)[1] if curv1 is None else np.asarray(curv1, dtype=np.float64)
    c2 = estimate_normals_curvature(b, k)[1] if curv2 is None else np.asarray(curv2, dtype=np.float64)
    i_ab, _ = kernels.nearest(a, b)
    i_ba, _ = kernels.nearest(b, a)
    return _mean(np.abs(c1 - c2[i_ab])) + _mean(np.abs(c2 - c1[i_ba]))


def mesh_metrics(truth: Mesh, recon: Mesh, k: int = 15) -> dict:
    """CD / NE / CP between the vertex sets of two meshes (mesh vertex normals for NE)."""
    a = PointSet(truth.positions, vertex_normals(truth))
    b = PointSet(recon.positions, vertex_normals(recon))
    return {
        "CD": chamfer(a, b),
        "NE": normals_error(a, b),
        "CP": curvature_preservation(a.points, b.points, k=k),
    }


def write_metrics_csv(rows, path) -> None:
    """``rows``: iterable of ``(mesh_id, {"CD":..., "NE":..., "CP":...})``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mesh_id", "CD", "NE", "CP"])
        for mesh_id, m in rows:
            w.writerow([mesh_id] + [format(float(m[key]), ".17g") for key in ("CD", "NE", "CP")])
