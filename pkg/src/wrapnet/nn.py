"""Layers built on :mod:`wrapnet.autodiff`: MLP, FaceConv, pooling, Adam, gradient checks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import kernels
from .autodiff import Tensor


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> Tensor:
    lim = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-lim, lim, size=shape), requires_grad=True)


def zeros_param(shape) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True)


class Module:
    """Holds named parameters and child modules; ``parameters()`` flattens them."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self._children: dict[str, Module] = {}

    def add_param(self, name, t):
        self._params[name] = t
        return t

    def add_child(self, name, mod):
        self._children[name] = mod
        return mod

    def parameters(self, prefix="") -> dict[str, Tensor]:
        out = {prefix + k: v for k, v in self._params.items()}
        for name, child in self._children.items():
            out.update(child.parameters(f"{prefix}{name}."))
        return out

    def zero_(self):
        for p in self.parameters().values():
            p.data[...] = 0.0


class MLP(Module):
    """Row-wise MLP, ReLU after every layer but the last."""

    def __init__(self, widths, rng):
        super().__init__()
        if len(widths) < 2 or min(widths) < 1:
            raise ValueError(f"bad MLP widths {widths}")
        self.widths = tuple(int(w) for w in widths)
        for k, (a, b) in enumerate(zip(self.widths[:-1], self.widths[1:])):
            self.add_param(f"W{k}", glorot(rng, a, b, (a, b)))
            self.add_param(f"b{k}", zeros_param((b,)))

    @property
    def n_layers(self):
        return len(self.widths) - 1

    def __call__(self, x):
        return mlp_forward(x, self)


def mlp_forward(x, mlp: MLP):
    x = ad.as_tensor(x)
    if x.ndim != 2 or x.shape[1] != mlp.widths[0]:
        raise ValueError(f"MLP expects (k, {mlp.widths[0]}), got {x.shape}")
    for k in range(mlp.n_layers):
        x = x @ mlp._params[f"W{k}"] + mlp._params[f"b{k}"]
        if k < mlp.n_layers - 1:
            x = ad.relu(x)
    return x


class FaceConv(Module):
    """Order-invariant face convolution over the three edge-neighbors.

    Weight rows are stacked as ``[w0; w1; w2; w3]``, each block ``(d_in, d_out)``.
    """

    def __init__(self, d_in, d_out, rng):
        super().__init__()
        self.d_in, self.d_out = int(d_in), int(d_out)
        self.add_param("W", glorot(rng, 4 * d_in, d_out, (4 * d_in, d_out)))
        self.add_param("b", zeros_param((d_out,)))

    @property
    def n_params(self):
        return 4 * self.d_in * self.d_out + self.d_out

    def __call__(self, features, adj):
        return face_conv(features, adj, self)


def face_conv(features, adj: np.ndarray, layer: FaceConv):
    """``F'_i = w0 F_i + w1 sum F_j + w2 sum |F_{j+1} - F_j| + w3 sum |F_i - F_j| + b``.

    ``j`` runs over the three neighbors of face ``i`` (cyclically for ``j+1``).
    Neighbor sums are order-canonical, so any reordering of the neighbor list
    gives a bit-identical result.
    """
    F = ad.as_tensor(features)
    if F.ndim != 2 or F.shape[1] != layer.d_in:
        raise ValueError(f"FaceConv expects (m, {layer.d_in}), got {F.shape}")
    if adj.shape != (F.shape[0], 3):
        raise ValueError(f"adjacency {adj.shape} does not match {F.shape[0]} faces")
    return ad.face_stack(F, adj) @ layer._params["W"] + layer._params["b"]


def global_mean_pool(features):
    """Column means as a ``(1, d)`` tensor, invariant to row order."""
    F = ad.as_tensor(features)
    if F.ndim != 2 or F.shape[0] < 1:
        raise ValueError("global_mean_pool needs at least one row")
    return ad.canonical_sum(F, axis=0, keepdims=True) * (1.0 / F.shape[0])


def pool_children(features):
    """Average groups of four consecutive rows (children ``4i..4i+3`` -> parent ``i``)."""
    F = ad.as_tensor(features)
    m4, d = F.shape
    if m4 % 4:
        raise ValueError(f"row count {m4} is not a multiple of 4")
    return ad.canonical_sum(ad.reshape(F, (m4 // 4, 4, d)), axis=1) * 0.25


def unpool_children(features):
    F = ad.as_tensor(features)
    return ad.take(F, np.repeat(np.arange(F.shape[0]), 4), axis=0)


# ---------------------------------------------------------------- Adam

class NonFiniteGradient(FloatingPointError):
    pass


@dataclass
class AdamState:
    lr: float = 5e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState) -> None:
    """One bias-corrected Adam update, in place.

    Entries whose gradient is exactly zero only decay their moments; the
    parameter value itself is left untouched.
    """
    for name, g in grads.items():
        if g is not None and not np.all(np.isfinite(g)):
            raise NonFiniteGradient(f"non-finite gradient for {name}")
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros(p.shape)
        if name not in state.m:
            state.m[name] = np.zeros(p.data.size)
            state.v[name] = np.zeros(p.data.size)
        if not p.data.flags.c_contiguous:
            p.data = np.ascontiguousarray(p.data)
        kernels.adam_update(p.data.reshape(-1), np.ascontiguousarray(g, dtype=np.float64).reshape(-1),
                            state.m[name], state.v[name], state.lr, state.beta1, state.beta2,
                            state.eps, c1, c2)


class Adam:
    def __init__(self, params: dict, lr=5e-5, betas=(0.9, 0.999), eps=1e-8):
        self.params = dict(params)
        self.state = AdamState(lr=lr, beta1=betas[0], beta2=betas[1], eps=eps)

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def step(self):
        adam_step(self.params, {k: p.grad for k, p in self.params.items()}, self.state)


# ---------------------------------------------------------------- gradient checking

@dataclass
class GradCheckReport:
    ok: bool
    rel_errors: list
    kink_margin: float

    def __bool__(self):
        return self.ok


def numeric_grad(fn, t: Tensor, h=1e-6) -> np.ndarray:
    out = np.zeros(t.shape)
    flat = t.data.reshape(-1)
    for k in range(flat.size):
        old = flat[k]
        flat[k] = old + h
        fp = float(fn().data)
        flat[k] = old - h
        fm = float(fn().data)
        flat[k] = old
        out.reshape(-1)[k] = (fp - fm) / (2 * h)
    return out


def rel_error(a: np.ndarray, b: np.ndarray) -> float:
    den = max(np.linalg.norm(a), np.linalg.norm(b))
    return 0.0 if den == 0 else float(np.linalg.norm(a - b) / den)


def grad_check(fn, inputs, tol=1e-5, h=1e-6, skip_exact_zeros=False) -> GradCheckReport:
    """Compare reverse-mode gradients of scalar ``fn()`` with central differences.

    ``kink_margin`` reports how close any abs/relu input sits to its kink;
    callers should resample when it is below ``1e-4``.
    """
    for t in inputs:
        t.grad = None
    out = fn()
    margin = ad.min_kink_distance(out, skip_exact_zeros)
    out.backward()
    errs = []
    for t in inputs:
        analytic = t.grad if t.grad is not None else np.zeros(t.shape)
        errs.append(rel_error(analytic, numeric_grad(fn, t, h)))
    return GradCheckReport(all(e < tol for e in errs), errs, margin)
