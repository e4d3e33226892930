"""Synthetic heterogeneous mesh dataset: icospheres, boxes, tori, ellipsoids.

Every sample has a coarse base mesh and a level-``L`` subdivision whose new
vertices are projected back onto the analytic surface (boxes stay flat).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .mesh import Mesh, normalize, require_manifold
from .meshio import load_mesh, save_mesh
from .subdivision import SubdivisionMesh, from_fine, loop_subdivide


def icosahedron() -> Mesh:
    t = (1.0 + math.sqrt(5.0)) / 2.0
    v = np.array([
        [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
        [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
        [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
    ], dtype=np.float64)
    f = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ])
    return Mesh(v / np.linalg.norm(v, axis=1, keepdims=True), f)


def tetrahedron() -> Mesh:
    v = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=np.float64)
    f = np.array([[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]])
    return Mesh(v, f)


def octahedron() -> Mesh:
    v = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=np.float64)
    f = np.array([[0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4],
                  [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5]])
    return Mesh(v, f)


def cube() -> Mesh:
    v = np.array([[x, y, z] for x in (-1, 1) for y in (-1, 1) for z in (-1, 1)], dtype=np.float64)
    # vertex index = 4*(x>0) + 2*(y>0) + (z>0); quads wound outward
    quads = [[0, 1, 3, 2], [4, 6, 7, 5], [0, 4, 5, 1], [2, 3, 7, 6], [0, 2, 6, 4], [1, 5, 7, 3]]
    f = []
    for a, b, c, d in quads:
        f += [[a, b, c], [a, c, d]]
    return Mesh(v, np.array(f))


def torus(n_major: int, n_minor: int, R: float = 1.0, r: float = 0.45) -> Mesh:
    """Parametric torus around the y axis."""
    if n_major < 3 or n_minor < 3:
        raise ValueError("torus needs at least 3 segments each way")
    u = 2 * np.pi * np.arange(n_major) / n_major
    w = 2 * np.pi * np.arange(n_minor) / n_minor
    U, W = np.meshgrid(u, w, indexing="ij")
    ring = R + r * np.cos(W)
    pos = np.stack([ring * np.cos(U), r * np.sin(W), ring * np.sin(U)], -1).reshape(-1, 3)
    f = []
    for i in range(n_major):
        for j in range(n_minor):
            a = i * n_minor + j
            b = ((i + 1) % n_major) * n_minor + j
            c = ((i + 1) % n_major) * n_minor + (j + 1) % n_minor
            d = i * n_minor + (j + 1) % n_minor
            f += [[a, d, c], [a, c, b]]
    return Mesh(pos, np.array(f))


def project_torus(p: np.ndarray, R: float, r: float) -> np.ndarray:
    ang = np.arctan2(p[:, 2], p[:, 0])
    center = np.stack([R * np.cos(ang), np.zeros(len(p)), R * np.sin(ang)], 1)
    d = p - center
    return center + r * d / np.linalg.norm(d, axis=1, keepdims=True)


def icosphere(level: int) -> Mesh:
    m = loop_subdivide(icosahedron(), level).fine
    return m.with_positions(m.positions / np.linalg.norm(m.positions, axis=1, keepdims=True))


def random_rotation(rng) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


@dataclass
class Sample:
    name: str
    label: str
    mesh: Mesh  # the vanilla (level-0) mesh
    subdiv: SubdivisionMesh  # hierarchy used by subdivision models


def _make(name, label, base: Mesh, project, vanilla_level: int, levels: int) -> Sample:
    """``project`` maps raw points onto the shape's surface.

    The vanilla mesh is level ``vanilla_level`` of the same projected hierarchy
    (renormalized on its own).
    """
    base = base.with_positions(project(base.positions))
    hier = loop_subdivide(base, max(levels, vanilla_level))
    meshes = [lv.with_positions(project(lv.positions)) for lv in hier.levels]
    fine = normalize(meshes[levels])
    sub = from_fine(base.triangles, fine, levels)
    return Sample(name, label, normalize(meshes[vanilla_level]), sub)


def _sphere_proj(p):
    return p / np.linalg.norm(p, axis=1, keepdims=True)


def make_dataset(seed: int = 0, levels: int = 3) -> list[Sample]:
    """Desk-scale heterogeneous set; all shapes are closed 2-manifolds."""
    rng = np.random.default_rng(seed)
    out = []
    for lvl in (1, 2, 3):
        rot = random_rotation(rng)
        out.append(_make(f"icosphere_{lvl}", "icosphere", icosahedron(),
                         lambda p, rot=rot: _sphere_proj(p) @ rot.T, lvl, levels))
    for k, lvl in enumerate((1, 2)):
        ext = rng.uniform(0.6, 1.4, size=3)
        out.append(_make(f"box_{k}", "box", cube().with_positions(cube().positions * ext),
                         lambda p: p, lvl, levels))
    for k, (a, b, lvl) in enumerate(((6, 3, 0), (8, 4, 1), (10, 5, 1))):
        R, r = 1.0, float(rng.uniform(0.35, 0.5))
        out.append(_make(f"torus_{k}", "torus", torus(a, b, R, r),
                         lambda p, R=R, r=r: project_torus(p, R, r), lvl, levels))
    for k, lvl in enumerate((1, 2)):
        axes = rng.uniform(0.5, 1.3, size=3)
        rot = random_rotation(rng)
        out.append(_make(f"ellipsoid_{k}", "ellipsoid", icosahedron(),
                         lambda p, axes=axes, rot=rot: (_sphere_proj(p) * axes) @ rot.T, lvl, levels))
    return out


def gen_synthetic(out_dir, seed: int = 0, levels: int = 3) -> Path:
    """Write ``<name>.off``, ``<name>_base.off``, ``<name>_L<levels>.off`` and ``manifest.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    samples = make_dataset(seed, levels)
    rows = []
    for s in samples:
        require_manifold(s.mesh)
        save_mesh(s.mesh, out / f"{s.name}.off")
        save_mesh(s.subdiv.base, out / f"{s.name}_base.off")
        save_mesh(s.subdiv.fine, out / f"{s.name}_L{s.subdiv.L}.off")
        rows.append([s.name, s.label, f"{s.name}.off", f"{s.name}_base.off",
                     f"{s.name}_L{s.subdiv.L}.off", s.subdiv.L])
    with open(out / "manifest.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["name", "label", "mesh", "base", "full", "levels"])
        w.writerows(rows)
    return out / "manifest.csv"


@dataclass
class DatasetEntry:
    name: str
    label: str
    mesh: Mesh
    subdiv: SubdivisionMesh | None


def load_dataset(path, levels: int = 0) -> list[DatasetEntry]:
    """Read a dataset directory (or its manifest).

    With ``levels > 0`` only entries whose hierarchy has exactly that depth are returned.
    """
    path = Path(path)
    manifest = path if path.is_file() else path / "manifest.csv"
    root = manifest.parent
    out = []
    with open(manifest, newline="") as fh:
        for row in csv.DictReader(fh):
            mesh = load_mesh(root / row["mesh"])
            sub = None
            if levels > 0:
                if int(row["levels"]) != levels:
                    continue
                base = load_mesh(root / row["base"])
                fine = load_mesh(root / row["full"])
                sub = from_fine(base.triangles, fine, levels)
            out.append(DatasetEntry(row["name"], row["label"], mesh, sub))
    return out
