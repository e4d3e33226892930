"""Face2Node and the FaceConv/Face2Node deformation block."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .mesh import Mesh, VertexStar, _face_adjacency, build_vertex_star
from .nn import MLP, FaceConv, Module, face_conv


@dataclass(frozen=True)
class Topology:
    """Connectivity-derived index tables reused by every layer of a block."""

    triangles: np.ndarray
    n_vertices: int
    adj: np.ndarray
    star_rows: np.ndarray  # (n, max valence) rows into rotation-stacked face copies
    inv_valence: np.ndarray  # (n, 1)

    @classmethod
    def of(cls, triangles, n_vertices) -> "Topology":
        tri = np.asarray(triangles, dtype=np.int64)
        star = build_vertex_star(Mesh(np.zeros((n_vertices, 3)), tri))
        return cls(tri, int(n_vertices), _face_adjacency(tri, n_vertices),
                   star.padded_rows(len(tri)), 1.0 / star.valence[:, None].astype(np.float64))

    @property
    def n_faces(self):
        return len(self.triangles)


class Face2Node(Module):
    """Shared 2-layer MLP mapping ``F_i || e_j || e_{j+1} || e_{j+2}`` to ``(delta, feature)``."""

    def __init__(self, d_face, d_out, hidden, rng):
        super().__init__()
        self.d_face, self.d_out = int(d_face), int(d_out)
        self.mlp = self.add_child("mlp", MLP([d_face + 9, hidden, 3 + d_out], rng))


def face2node_forward(positions, features, topo: Topology, layer: Face2Node):
    """Return ``(new_positions (n,3), new_features (m,d_out))``.

    Edge vectors come from the incoming positions and every vertex moves at
    once by the mean of its per-face predictions.
    """
    X = ad.as_tensor(positions)
    F = ad.as_tensor(features)
    m = topo.n_faces
    if F.shape != (m, layer.d_face):
        raise ValueError(f"Face2Node expects features ({m}, {layer.d_face}), got {F.shape}")
    if X.shape != (topo.n_vertices, 3):
        raise ValueError(f"positions {X.shape} do not match {topo.n_vertices} vertices")
    corners = ad.take(X, topo.triangles, axis=0)  # (m, 3, 3)
    e = ad.take(corners, [1, 2, 0], axis=1) - corners  # e_k = x_{k+1} - x_k
    edges = [ad.reshape(ad.take(e, [k], axis=1), (m, 3)) for k in range(3)]
    # rows r*m + i hold rotation r of face i; the face-feature part of the first
    # layer is shared by all three rotations, so it is computed once per face
    edge_rows = ad.concat([ad.concat([edges[r], edges[(r + 1) % 3], edges[(r + 2) % 3]], axis=1)
                           for r in range(3)], axis=0)
    g = _face2node_mlp(F, edge_rows, layer)
    pad = ad.concat([g[:, :3], Tensor(np.zeros((1, 3)))], axis=0)
    gathered = ad.take(pad, topo.star_rows, axis=0)  # (n, val, 3)
    delta = ad.canonical_sum(gathered, axis=1) * topo.inv_valence
    feats = ad.reshape(g[:, 3:], (3, m, layer.d_out))
    new_f = ad.canonical_sum(feats, axis=0) * (1.0 / 3.0)
    return X + delta, new_f


def _face2node_mlp(F, edge_rows, layer: Face2Node):
    """``layer.mlp`` applied to ``[F_i, edges]`` rows, without materializing the concatenation."""
    mlp, d = layer.mlp, layer.d_face
    W0, b0 = mlp._params["W0"], mlp._params["b0"]
    hf = F @ W0[:d]
    x = ad.concat([hf, hf, hf], axis=0) + edge_rows @ W0[d:] + b0
    for k in range(1, mlp.n_layers + 1):
        if k == mlp.n_layers:
            break
        x = ad.relu(x)
        x = x @ mlp._params[f"W{k}"] + mlp._params[f"b{k}"]
    return x


class DeformationBlock(Module):
    """``depth`` x (FaceConv -> ReLU -> Face2Node); moves vertices, keeps connectivity."""

    def __init__(self, d_in, hidden, rng, depth=2):
        super().__init__()
        if depth < 1:
            raise ValueError("depth must be >= 1")
        self.d_in, self.hidden, self.depth = int(d_in), int(hidden), int(depth)
        self.convs, self.f2n = [], []
        d = d_in
        for k in range(depth):
            self.convs.append(self.add_child(f"conv{k}", FaceConv(d, hidden, rng)))
            self.f2n.append(self.add_child(f"f2n{k}", Face2Node(hidden, hidden, hidden, rng)))
            d = hidden

    def __call__(self, positions, features, topo):
        return deformation_block_forward(positions, features, topo, self)


def deformation_block_forward(positions, features, topo: Topology, block: DeformationBlock,
                              conditioning=None):
    """Run a block; ``conditioning`` (a ``(1, c)`` row) is appended to every face feature."""
    F = ad.as_tensor(features)
    if conditioning is not None:
        c = ad.as_tensor(conditioning)
        F = ad.concat([F, ad.take(c, np.zeros(topo.n_faces, dtype=np.int64), axis=0)], axis=1)
    X = ad.as_tensor(positions)
    for conv, f2n in zip(block.convs, block.f2n):
        F = ad.relu(face_conv(F, topo.adj, conv))
        X, F = face2node_forward(X, F, topo, f2n)
    return X, F
