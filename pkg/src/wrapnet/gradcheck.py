"""Seeded finite-difference checks for every differentiable layer.

Each case draws random inputs and parameters, and redraws when some abs/ReLU
input lands within ``1e-4`` of its kink (where central differences are not
meaningful).
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .mesh import _face_adjacency
from .model import reconstruction_loss, sphere_chamfer_loss
from .nn import MLP, FaceConv, GradCheckReport, face_conv, global_mean_pool, grad_check, pool_children, unpool_children
from .synthetic import octahedron
from .wrapping import DeformationBlock, Face2Node, Topology, deformation_block_forward, face2node_forward

KINK_MARGIN = 1e-4
_OCTA = octahedron()
_OCTA_TOPO = Topology.of(_OCTA.triangles, _OCTA.n_vertices)
_OCTA_ADJ = _face_adjacency(_OCTA.triangles, _OCTA.n_vertices)


def _param(rng, *shape):
    return Tensor(rng.standard_normal(shape), requires_grad=True)


def _reinit(module, rng, scale=0.7):
    for p in module.parameters().values():
        p.data[...] = scale * rng.standard_normal(p.shape)
    return list(module.parameters().values())


def _case_mlp(rng):
    mlp = MLP([4, 6, 3], rng)
    params = _reinit(mlp, rng)
    x = _param(rng, 5, 4)
    w = rng.standard_normal((5, 3))
    return (lambda: ad.tsum(mlp(x) * w)), [x] + params


def _case_faceconv(rng):
    layer = FaceConv(3, 4, rng)
    params = _reinit(layer, rng)
    F = _param(rng, _OCTA.n_faces, 3)
    w = rng.standard_normal((_OCTA.n_faces, 4))
    return (lambda: ad.tsum(face_conv(F, _OCTA_ADJ, layer) * w)), [F] + params


def _case_face2node(rng):
    layer = Face2Node(3, 2, 5, rng)
    params = _reinit(layer, rng)
    X = Tensor(_OCTA.positions + 0.1 * rng.standard_normal(_OCTA.positions.shape), requires_grad=True)
    F = _param(rng, _OCTA.n_faces, 3)
    wx = rng.standard_normal((_OCTA.n_vertices, 3))
    wf = rng.standard_normal((_OCTA.n_faces, 2))

    def fn():
        Xn, Fn = face2node_forward(X, F, _OCTA_TOPO, layer)
        return ad.tsum(Xn * wx) + ad.tsum(Fn * wf)
    return fn, [X, F] + params


def _case_block(rng):
    block = DeformationBlock(3 + 2, 4, rng, depth=2)
    params = _reinit(block, rng, 0.5)
    X = Tensor(_OCTA.positions.copy(), requires_grad=True)
    F = _param(rng, _OCTA.n_faces, 3)
    c = _param(rng, 1, 2)
    wx = rng.standard_normal((_OCTA.n_vertices, 3))

    def fn():
        Xn, _ = deformation_block_forward(X, F, _OCTA_TOPO, block, conditioning=c)
        return ad.tsum(Xn * wx)
    return fn, [X, F, c] + params


def _case_pool(rng):
    F = _param(rng, 12, 3)
    w = rng.standard_normal((3, 3))
    return (lambda: ad.tsum(pool_children(F) * w)), [F]


def _case_unpool(rng):
    F = _param(rng, 3, 2)
    w = rng.standard_normal((12, 2))
    return (lambda: ad.tsum(unpool_children(F) * w)), [F]


def _case_global_pool(rng):
    F = _param(rng, 7, 4)
    w = rng.standard_normal((1, 4))
    return (lambda: ad.tsum(global_mean_pool(F) * w)), [F]


def _case_mse(rng):
    target = rng.standard_normal((9, 3))
    R = _param(rng, 9, 3)
    corr = rng.permutation(9)
    return (lambda: reconstruction_loss(target, R, corr)), [R]


def _case_chamfer(rng):
    X = _param(rng, 10, 3)
    S = rng.standard_normal((13, 3))
    return (lambda: sphere_chamfer_loss(X, S)), [X]


CASES = {
    "MLP": _case_mlp,
    "FaceConv": _case_faceconv,
    "Face2Node": _case_face2node,
    "DeformationBlock": _case_block,
    "pool_children": _case_pool,
    "unpool_children": _case_unpool,
    "global_mean_pool": _case_global_pool,
    "reconstruction_loss": _case_mse,
    "sphere_chamfer_loss": _case_chamfer,
}


# the broadcast conditioning row gives |c - c| == 0 in the first FaceConv, for any c
_STRUCTURAL_ZEROS = {"DeformationBlock"}


def check_case(name: str, rng, tol=1e-5, h=1e-6, max_draws=50) -> GradCheckReport:
    for _ in range(max_draws):
        fn, inputs = CASES[name](rng)
        skip = name in _STRUCTURAL_ZEROS
        if ad.min_kink_distance(fn(), skip_exact_zeros=skip) < KINK_MARGIN:
            continue
        return grad_check(fn, inputs, tol=tol, h=h, skip_exact_zeros=skip)
    raise RuntimeError(f"could not draw a kink-free instance for {name}")


def run_layer_checks(seed: int = 0, instances: int = 5, tol=1e-5):
    """Yield ``(layer name, report)`` for ``instances`` seeded draws per layer."""
    for name in CASES:
        for k in range(instances):
            rng = np.random.default_rng([seed, k, sum(map(ord, name))])
            yield f"{name}[{k}]", check_case(name, rng, tol=tol)
