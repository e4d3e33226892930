"""Triangle meshes: validation, adjacency, local face geometry."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class MeshError(ValueError):
    """Raised for invalid mesh data (bad indices, non-manifold input, degenerate faces)."""


@dataclass(frozen=True)
class Mesh:
    """Vertex positions ``(n, 3)`` plus triangles ``(m, 3)`` of 0-based indices.

    Triangles are wound so that normals point outward.
    """

    positions: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        pos = np.ascontiguousarray(self.positions, dtype=np.float64)
        tri = np.ascontiguousarray(self.triangles, dtype=np.int64)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise MeshError(f"positions must be (n, 3), got {pos.shape}")
        if tri.ndim != 2 or tri.shape[1] != 3:
            raise MeshError(f"triangles must be (m, 3), got {tri.shape}")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "triangles", tri)

    @property
    def n_vertices(self) -> int:
        return self.positions.shape[0]

    @property
    def n_faces(self) -> int:
        return self.triangles.shape[0]

    def with_positions(self, positions) -> "Mesh":
        return Mesh(positions, self.triangles)

    def edges(self) -> np.ndarray:
        return unique_edges(self.triangles)

    def euler_characteristic(self) -> int:
        used = np.unique(self.triangles).size
        return used - len(self.edges()) + self.n_faces

    def __eq__(self, other):
        if not isinstance(other, Mesh):
            return NotImplemented
        return (np.array_equal(self.positions, other.positions)
                and np.array_equal(self.triangles, other.triangles))

    __hash__ = None


def unique_edges(triangles: np.ndarray) -> np.ndarray:
    """Sorted undirected edges ``(E, 2)`` with ``a < b``, in lexicographic order."""
    tri = np.asarray(triangles, dtype=np.int64)
    e = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    e.sort(axis=1)
    return np.unique(e, axis=0)


@dataclass
class ValidationReport:
    ok: bool
    violations: list[str] = field(default_factory=list)

    def __bool__(self):
        return self.ok


def validate_manifold(mesh: Mesh) -> ValidationReport:
    """Check that ``mesh`` is a closed, consistently oriented 2-manifold.

    Never raises; every problem found is listed in the report.
    """
    out: list[str] = []
    n, tri = mesh.n_vertices, mesh.triangles
    if n == 0 or len(tri) == 0:
        return ValidationReport(False, ["empty mesh"])
    if tri.min() < 0 or tri.max() >= n:
        return ValidationReport(False, ["triangle index out of range"])

    rep = (tri[:, 0] == tri[:, 1]) | (tri[:, 1] == tri[:, 2]) | (tri[:, 0] == tri[:, 2])
    for i in np.flatnonzero(rep):
        out.append(f"face {i} repeats a vertex")
    if rep.any():
        return ValidationReport(False, out)

    key = np.sort(tri, axis=1)
    _, first, counts = np.unique(key, axis=0, return_index=True, return_counts=True)
    for i in first[counts > 1]:
        out.append(f"face {i} duplicated")

    area = 0.5 * np.linalg.norm(_cross_edges(mesh.positions, tri), axis=1)
    for i in np.flatnonzero(~(area > 0)):
        out.append(f"face {i} has zero area")

    used = np.zeros(n, dtype=bool)
    used[tri.ravel()] = True
    for v in np.flatnonzero(~used):
        out.append(f"vertex {v} unreferenced")

    directed = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    d_keys, d_counts = np.unique(directed[:, 0] * n + directed[:, 1], return_counts=True)
    und = np.sort(directed, axis=1)
    u_keys, u_counts = np.unique(und[:, 0] * n + und[:, 1], return_counts=True)
    for k, c in zip(u_keys, u_counts):
        a, b = divmod(int(k), n)
        if c == 1:
            out.append(f"boundary edge ({a}, {b})")
        elif c > 2:
            out.append(f"non-manifold edge ({a}, {b}) shared by {c} faces")
    for k in d_keys[d_counts > 1]:
        a, b = divmod(int(k), n)
        out.append(f"orientation: directed edge ({a}, {b}) used {int(d_counts[d_keys == k][0])} times")

    if not out:
        # vertex links must be single fans (rules out pinched vertices)
        star = build_vertex_star(mesh)
        for v in range(n):
            faces = star.faces_of(v)
            nxt = {}
            for f, j in zip(faces, star.local_of(v)):
                t = tri[f]
                nxt[int(t[(j + 1) % 3])] = int(t[(j + 2) % 3])
            start = next(iter(nxt))
            cur, steps = nxt[start], 1
            while cur != start and steps <= len(nxt):
                cur = nxt.get(cur, start)
                steps += 1
            if steps != len(nxt):
                out.append(f"non-manifold vertex {v}")
    return ValidationReport(not out, out)


def require_manifold(mesh: Mesh) -> None:
    rep = validate_manifold(mesh)
    if not rep.ok:
        shown = "; ".join(rep.violations[:5])
        more = f" (+{len(rep.violations) - 5} more)" if len(rep.violations) > 5 else ""
        raise MeshError(f"mesh is not a closed oriented 2-manifold: {shown}{more}")


def _exact_mean_rows(x: np.ndarray) -> np.ndarray:
    # correctly rounded, so independent of row order
    return np.array([math.fsum(col) / len(col) for col in x.T])


def normalize(mesh: Mesh) -> Mesh:
    """Center on the vertex centroid and scale so the farthest vertex has norm 1."""
    if mesh.n_vertices < 1:
        raise MeshError("cannot normalize an empty mesh")
    pos = mesh.positions - _exact_mean_rows(mesh.positions)
    scale = np.sqrt((pos * pos).sum(axis=1)).max()
    if not scale > 0:
        raise MeshError("all vertices coincide; scale undefined")
    pos = pos / scale
    # second pass removes the rounding residue of the first
    pos = pos - _exact_mean_rows(pos)
    pos = pos / np.sqrt((pos * pos).sum(axis=1)).max()
    return Mesh(pos, mesh.triangles)


def build_face_adjacency(mesh: Mesh) -> np.ndarray:
    """``(m, 3)`` array; entry ``[i, k]`` is the face across edge ``(t[k], t[k+1])`` of face ``i``."""
    rep = validate_manifold(mesh)
    if not rep.ok:
        raise MeshError("face adjacency needs a closed manifold: " + rep.violations[0])
    return _face_adjacency(mesh.triangles, mesh.n_vertices)


def _face_adjacency(tri: np.ndarray, n: int) -> np.ndarray:
    m = len(tri)
    src = np.concatenate([tri[:, 0], tri[:, 1], tri[:, 2]])
    dst = np.concatenate([tri[:, 1], tri[:, 2], tri[:, 0]])
    keys = src * n + dst
    order = np.argsort(keys)
    sorted_keys = keys[order]
    twin = dst * n + src
    pos = np.searchsorted(sorted_keys, twin)
    owner = order[pos] % m
    return np.ascontiguousarray(owner.reshape(3, m).T)


@dataclass(frozen=True)
class VertexStar:
    """CSR list of ``(face, local index)`` pairs for every vertex, faces ascending."""

    offsets: np.ndarray
    faces: np.ndarray
    local: np.ndarray

    def faces_of(self, v: int) -> np.ndarray:
        return self.faces[self.offsets[v]:self.offsets[v + 1]]

    def local_of(self, v: int) -> np.ndarray:
        return self.local[self.offsets[v]:self.offsets[v + 1]]

    @property
    def valence(self) -> np.ndarray:
        return np.diff(self.offsets)

    def padded_rows(self, n_faces: int) -> np.ndarray:
        """``(n, max_valence)`` indices into the rotation-stacked rows ``j * m + i``.

        Missing slots point at row ``3 * m`` (reserved for a zero row).
        """
        val = self.valence
        n = len(val)
        width = int(val.max()) if n else 0
        out = np.full((n, width), 3 * n_faces, dtype=np.int64)
        slot = np.arange(len(self.faces)) - np.repeat(self.offsets[:-1], val)
        rows = np.repeat(np.arange(n), val)
        out[rows, slot] = self.local * n_faces + self.faces
        return out


def build_vertex_star(mesh: Mesh) -> VertexStar:
    tri = mesh.triangles
    m = len(tri)
    verts = tri.ravel()
    faces = np.repeat(np.arange(m), 3)
    local = np.tile(np.arange(3), m)
    order = np.lexsort((faces, verts))
    counts = np.bincount(verts, minlength=mesh.n_vertices)
    offsets = np.concatenate([[0], np.cumsum(counts)])
    return VertexStar(offsets, faces[order], local[order])


def _cross_edges(pos: np.ndarray, tri: np.ndarray) -> np.ndarray:
    p0, p1, p2 = pos[tri[:, 0]], pos[tri[:, 1]], pos[tri[:, 2]]
    return np.cross(p1 - p0, p2 - p0)


def face_geometry(mesh: Mesh):
    """Return ``(normals (m,3), areas (m,), centroids (m,3))``."""
    pos, tri = mesh.positions, mesh.triangles
    cr = _cross_edges(pos, tri)
    norm = np.sqrt((cr * cr).sum(axis=1))
    if not np.all(norm > 0):
        bad = int(np.flatnonzero(~(norm > 0))[0])
        raise MeshError(f"face {bad} has zero area")
    normals = cr / norm[:, None]
    centroids = (pos[tri[:, 0]] + pos[tri[:, 1]] + pos[tri[:, 2]]) / 3.0
    return normals, 0.5 * norm, centroids


def init_face_features(mesh: Mesh, adj: np.ndarray | None = None) -> np.ndarray:
    """Per-face local descriptors ``(m, 7)``: normal, area, curvature vector.

    The curvature vector is the face centroid minus the mean of the three
    neighboring centroids, so only relative positions enter.
    """
    if adj is None:
        adj = build_face_adjacency(mesh)
    normals, areas, cent = face_geometry(mesh)
    nb = cent[adj]
    curv = cent - (nb[:, 0] + nb[:, 1] + nb[:, 2]) / 3.0
    return np.concatenate([normals, areas[:, None], curv], axis=1)


def _check_perm(p, size: int, what: str) -> np.ndarray:
    p = np.asarray(p, dtype=np.int64)
    if p.shape != (size,) or not np.array_equal(np.sort(p), np.arange(size)):
        raise MeshError(f"{what} is not a bijection on 0..{size - 1}")
    return p


def permute(mesh: Mesh, vertex_perm, face_perm) -> Mesh:
    """Relabel a mesh: old vertex ``i`` becomes ``vertex_perm[i]``, old face ``f`` becomes ``face_perm[f]``.

    Within-face vertex order is kept, so the winding is unchanged.
    """
    vp = _check_perm(vertex_perm, mesh.n_vertices, "vertex_perm")
    fp = _check_perm(face_perm, mesh.n_faces, "face_perm")
    pos = np.empty_like(mesh.positions)
    pos[vp] = mesh.positions
    tri = np.empty_like(mesh.triangles)
    tri[fp] = vp[mesh.triangles]
    return Mesh(pos, tri)


def canonical_triangles(tri: np.ndarray) -> np.ndarray:
    """Rotate each row so its smallest index leads (winding kept), then sort rows."""
    tri = np.asarray(tri, dtype=np.int64)
    k = np.argmin(tri, axis=1)
    idx = (k[:, None] + np.arange(3)) % 3
    rot = np.take_along_axis(tri, idx, axis=1)
    order = np.lexsort((rot[:, 2], rot[:, 1], rot[:, 0]))
    return np.ascontiguousarray(rot[order])


def vertex_normals(mesh: Mesh) -> np.ndarray:
    """Area-weighted average of incident face normals, unit length."""
    normals, areas, _ = face_geometry(mesh)
    acc = np.zeros_like(mesh.positions)
    w = normals * areas[:, None]
    for k in range(3):
        np.add.at(acc, mesh.triangles[:, k], w)
    return acc / np.linalg.norm(acc, axis=1, keepdims=True)
