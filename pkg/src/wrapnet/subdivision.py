"""Midpoint (Loop-connectivity) subdivision hierarchies and 4:1 face pooling.

Indexing convention, applied identically at every level:

* vertices of level ``l`` keep their indices at level ``l + 1``; the midpoint
  of the ``r``-th edge (edges sorted lexicographically as ``(a, b)``, ``a < b``)
  gets index ``V_l + r``;
* face ``i`` with corners ``(a, b, c)`` becomes faces ``4i .. 4i+3``:
  ``(a, ab, ca)``, ``(ab, b, bc)``, ``(ca, bc, c)``, ``(ab, bc, ca)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Mesh, MeshError, require_manifold, unique_edges


@dataclass(frozen=True)
class SubdivisionMesh:
    levels: tuple  # Mesh per level, 0 = base
    edges: tuple  # sorted edge array of level l, for l < L

    @property
    def L(self) -> int:
        return len(self.levels) - 1

    @property
    def base(self) -> Mesh:
        return self.levels[0]

    @property
    def fine(self) -> Mesh:
        return self.levels[-1]

    def child_map(self, level: int) -> np.ndarray:
        """``(m_level, 4)`` child face indices at ``level + 1``."""
        m = self.levels[level].n_faces
        return np.arange(4 * m, dtype=np.int64).reshape(m, 4)


def subdivide_connectivity(tri: np.ndarray, n_vertices: int):
    """One 1-to-4 split. Returns ``(new_triangles, edges)``."""
    tri = np.asarray(tri, dtype=np.int64)
    edges = unique_edges(tri)
    keys = edges[:, 0] * n_vertices + edges[:, 1]

    def mid(a, b):
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        return n_vertices + np.searchsorted(keys, lo * n_vertices + hi)

    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
    kids = np.stack([
        np.stack([a, ab, ca], 1),
        np.stack([ab, b, bc], 1),
        np.stack([ca, bc, c], 1),
        np.stack([ab, bc, ca], 1),
    ], axis=1)
    return kids.reshape(-1, 3), edges


def hierarchy_connectivity(base_triangles: np.ndarray, n_base: int, levels: int):
    """Triangles and edge lists for levels ``0..levels`` of a base connectivity."""
    tris, edges, counts = [np.asarray(base_triangles, dtype=np.int64)], [], [n_base]
    for _ in range(levels):
        t, e = subdivide_connectivity(tris[-1], counts[-1])
        edges.append(e)
        counts.append(counts[-1] + len(e))
        tris.append(t)
    return tris, edges, counts


def loop_subdivide(mesh: Mesh, levels: int) -> SubdivisionMesh:
    """Split every face 1-to-4 ``levels`` times, new vertices at edge midpoints."""
    if levels < 0:
        raise ValueError("levels must be >= 0")
    require_manifold(mesh)
    tris, edges, _ = hierarchy_connectivity(mesh.triangles, mesh.n_vertices, levels)
    meshes = [mesh]
    for lv in range(levels):
        pos = meshes[-1].positions
        e = edges[lv]
        mids = 0.5 * (pos[e[:, 0]] + pos[e[:, 1]])
        meshes.append(Mesh(np.concatenate([pos, mids]), tris[lv + 1]))
    return SubdivisionMesh(tuple(meshes), tuple(edges))


def from_fine(base_triangles, fine: Mesh, levels: int) -> SubdivisionMesh:
    """Rebuild the hierarchy of a fine mesh whose connectivity is ``levels`` splits of
    ``base_triangles``; coarse positions are the inherited vertex prefix."""
    base_triangles = np.asarray(base_triangles, dtype=np.int64)
    n_base = int(base_triangles.max()) + 1
    tris, edges, counts = hierarchy_connectivity(base_triangles, n_base, levels)
    if counts[-1] != fine.n_vertices or not np.array_equal(tris[-1], fine.triangles):
        raise MeshError("fine mesh is not a subdivision of the given base connectivity")
    meshes = tuple(Mesh(fine.positions[:counts[lv]], tris[lv]) for lv in range(levels + 1))
    require_manifold(meshes[0])
    return SubdivisionMesh(meshes, tuple(edges))


def pool_faces(features: np.ndarray, child_map: np.ndarray) -> np.ndarray:
    """Average each parent's four children."""
    features = np.asarray(features)
    if features.shape[0] != child_map.size:
        raise ValueError(f"expected {child_map.size} feature rows, got {features.shape[0]}")
    g = np.sort(features[child_map], axis=1)
    return g.sum(axis=1) / 4.0


def unpool_faces(features: np.ndarray) -> np.ndarray:
    return np.repeat(features, 4, axis=0)


def lift_matching(sigma_base, subdiv: SubdivisionMesh, level: int) -> np.ndarray:
    """Extend a base-vertex relabeling to level ``level``.

    ``sigma_base`` is a bijection on base vertices; the target hierarchy is the
    base connectivity relabeled through it and subdivided with the same rules.
    Returns ``out`` with source vertex ``v`` corresponding to target ``out[v]``.
    """
    if level > subdiv.L or level < 0:
        raise ValueError(f"level {level} outside 0..{subdiv.L}")
    sigma = np.asarray(sigma_base, dtype=np.int64)
    base = subdiv.base
    if sigma.shape != (base.n_vertices,):
        raise ValueError("sigma_base must cover every base vertex")
    tgt_tri = sigma[base.triangles]
    _, tgt_edges, counts = hierarchy_connectivity(tgt_tri, base.n_vertices, level)
    out = sigma
    for lv in range(level):
        n = counts[lv]
        src_e = subdiv.edges[lv]
        a, b = out[src_e[:, 0]], out[src_e[:, 1]]
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        tk = tgt_edges[lv]
        rank = np.searchsorted(tk[:, 0] * n + tk[:, 1], lo * n + hi)
        out = np.concatenate([out, n + rank])
    return out
