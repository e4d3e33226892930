"""ASCII OBJ / OFF reading and writing (triangles only)."""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .mesh import Mesh, MeshError


class MeshParseError(MeshError):
    pass


_REJECTED_OBJ = {"vn", "vt", "vp", "mtllib", "usemtl", "l", "p", "curv", "surf"}


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _guess_format(path, fmt):
    if fmt is None:
        fmt = Path(path).suffix.lstrip(".")
    fmt = fmt.upper()
    if fmt not in ("OBJ", "OFF"):
        raise MeshParseError(f"unsupported mesh format {fmt!r}")
    return fmt


def _finish(verts, faces, where) -> Mesh:
    if not verts or not faces:
        raise MeshParseError(f"{where}: empty mesh")
    tri = np.array(faces, dtype=np.int64)
    n = len(verts)
    if tri.min() < 0 or tri.max() >= n:
        raise MeshParseError(f"{where}: face index out of range for {n} vertices")
    return Mesh(np.array(verts, dtype=np.float64), tri)


def parse_obj(text: str, where: str = "<obj>") -> Mesh:
    verts, faces = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        kind = tok[0]
        try:
            if kind == "v":
                if len(tok) != 4:
                    raise ValueError("expected 'v x y z'")
                verts.append([float(t) for t in tok[1:]])
            elif kind == "f":
                if len(tok) != 4:
                    raise ValueError(f"only triangles supported, got {len(tok) - 1}-gon")
                if any("/" in t for t in tok[1:]):
                    raise ValueError("texture/normal references in faces are not supported")
                idx = [int(t) for t in tok[1:]]
                if min(idx) < 1:
                    raise ValueError("face index out of range")
                faces.append([i - 1 for i in idx])
            elif kind in _REJECTED_OBJ:
                raise ValueError(f"unsupported OBJ element {kind!r}")
        except ValueError as e:
            raise MeshParseError(f"{where}:{lineno}: {e}") from None
    return _finish(verts, faces, where)


def parse_off(text: str, where: str = "<off>") -> Mesh:
    lines = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append((lineno, line))
    if not lines:
        raise MeshParseError(f"{where}: empty file")
    lineno, head = lines[0]
    tok = head.split()
    if tok[0] != "OFF":
        raise MeshParseError(f"{where}:{lineno}: missing OFF header")
    rest = lines[1:]
    if len(tok) > 1:
        rest = [(lineno, " ".join(tok[1:]))] + rest
    try:
        lineno, counts = rest[0]
        nv, nf, *_ = (int(t) for t in counts.split())
        if len(rest) < 1 + nv + nf:
            raise ValueError("file truncated")
        verts = []
        for lineno, line in rest[1:1 + nv]:
            t = line.split()
            if len(t) < 3:
                raise ValueError("vertex line needs 3 coordinates")
            verts.append([float(x) for x in t[:3]])
        faces = []
        for lineno, line in rest[1 + nv:1 + nv + nf]:
            t = [int(x) for x in line.split()]
            if t[0] != 3:
                raise ValueError(f"only triangles supported, got {t[0]}-gon")
            if len(t) < 4:
                raise ValueError("face line truncated")
            faces.append(t[1:4])
    except (ValueError, IndexError) as e:
        raise MeshParseError(f"{where}:{lineno}: {e}") from None
    return _finish(verts, faces, where)


def load_mesh(path, fmt: str | None = None) -> Mesh:
    fmt = _guess_format(path, fmt)
    text = Path(path).read_text()
    return parse_obj(text, str(path)) if fmt == "OBJ" else parse_off(text, str(path))


def format_mesh(mesh: Mesh, fmt: str) -> str:
    fmt = fmt.upper()
    vlines = [" ".join(_fmt(c) for c in p) for p in mesh.positions]
    if fmt == "OBJ":
        out = ["v " + s for s in vlines]
        out += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.triangles]
    else:
        out = ["OFF", f"{mesh.n_vertices} {mesh.n_faces} 0"] + vlines
        out += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    return "\n".join(out) + "\n"


def save_mesh(mesh: Mesh, path, fmt: str | None = None) -> None:
    fmt = _guess_format(path, fmt)
    text = format_mesh(mesh, fmt)
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def save_points_off(points: np.ndarray, path) -> None:
    """Write a vertex-only OFF (point cloud)."""
    lines = ["OFF", f"{len(points)} 0 0"]
    lines += [" ".join(_fmt(c) for c in p) for p in points]
    Path(path).write_text("\n".join(lines) + "\n")
