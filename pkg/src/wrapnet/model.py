"""Mesh autoencoder with a codeword plus base-graph bottleneck.

Encoder: face-feature extractor + shared MLP + global pooling give the codeword;
an UnWrapping deformation block pushes the (base) mesh toward the unit sphere,
which is then matched onto the sphere grid to produce the base graph.
Decoder: the base graph placed on the sphere grid is wrapped back into the
shape by deformation blocks conditioned on the codeword (optionally
interleaved with midpoint subdivision).
"""

from __future__ import annotations

import dataclasses
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .assignment import MatchingMap, match_to_sphere_grid
from .autodiff import Tensor
from .mesh import Mesh, MeshError, canonical_triangles, init_face_features, validate_manifold
from .nn import (Adam, FaceConv, MLP, Module, NonFiniteGradient, face_conv, global_mean_pool,
                 pool_children, unpool_children)
from .sphere import FULL_SPHERE, VARIANTS, fibonacci_grid, sample_sphere_uniform
from .subdivision import SubdivisionMesh, hierarchy_connectivity, lift_matching
from .wrapping import DeformationBlock, Face2Node, Topology, deformation_block_forward, face2node_forward

SEND_BASE_GRAPH = "base_graph"
SEND_APPROX_SPHERE = "approx_sphere"
SEND_BASE_MESH = "base_mesh"
MODES = (SEND_BASE_GRAPH, SEND_APPROX_SPHERE, SEND_BASE_MESH)


class ConfigError(ValueError):
    pass


@dataclass
class ModelConfig:
    mode: str = SEND_BASE_GRAPH
    levels: int = 0
    grid_n: int = 64
    grid_variant: str = FULL_SPHERE
    fe_layers: int = 4
    fe_hidden: int = 128
    fe_out: int = 1024
    mlp_hidden: int = 1024
    mlp_layers: int = 4
    code_dim: int = 512
    unwrap_hidden: int = 64
    wrap_hidden: int = 128
    block_depth: int = 2
    seed: int = 0
    lr: float = 5e-5
    pretrain_steps: int = 1000
    chamfer_samples: int = 0  # 0: one sample per M_AS vertex

    def validate(self) -> "ModelConfig":
        if self.mode not in MODES:
            raise ConfigError(f"unknown bottleneck mode {self.mode!r}")
        if self.grid_variant not in VARIANTS:
            raise ConfigError(f"unknown grid variant {self.grid_variant!r}")
        if self.levels < 0 or self.levels > self.fe_layers:
            raise ConfigError(f"levels must be in 0..{self.fe_layers}")
        if self.grid_n < 2:
            raise ConfigError("grid_n must be >= 2")
        for name in ("fe_layers", "fe_hidden", "fe_out", "mlp_hidden", "code_dim",
                     "unwrap_hidden", "wrap_hidden", "block_depth"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.mlp_layers < 0 or self.chamfer_samples < 0 or self.pretrain_steps < 0:
            raise ConfigError("negative count in config")
        if not self.lr > 0:
            raise ConfigError("lr must be positive")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name: f for f in dataclasses.fields(cls)}
        kw = {}
        for k, v in d.items():
            if k not in known:
                raise ConfigError(f"unknown config key {k!r}")
            typ = type(getattr(cls(), k))
            kw[k] = typ(v)
        return cls(**kw).validate()


def set_bottleneck_mode(config: ModelConfig, mode: str) -> ModelConfig:
    if mode not in MODES:
        raise ConfigError(f"unknown bottleneck mode {mode!r}")
    return dataclasses.replace(config, mode=mode)


# ---------------------------------------------------------------- inputs

@dataclass
class Prepared:
    """A training/inference sample with its per-level index tables precomputed."""

    subdiv: SubdivisionMesh
    topos: list
    features: np.ndarray  # 7-dim features at the finest level
    base_features: np.ndarray

    @property
    def L(self):
        return self.subdiv.L

    @property
    def base(self) -> Mesh:
        return self.subdiv.base

    @property
    def fine(self) -> Mesh:
        return self.subdiv.fine


def as_subdivision(sample) -> SubdivisionMesh:
    if isinstance(sample, SubdivisionMesh):
        return sample
    if isinstance(sample, Mesh):
        return SubdivisionMesh((sample,), ())
    raise TypeError(f"expected Mesh or SubdivisionMesh, got {type(sample).__name__}")


def prepare(sample) -> Prepared:
    sub = as_subdivision(sample)
    rep = validate_manifold(sub.base)
    if not rep.ok:
        raise MeshError("input base mesh invalid: " + rep.violations[0])
    topos = [Topology.of(lv.triangles, lv.n_vertices) for lv in sub.levels]
    feats = init_face_features(sub.fine, topos[-1].adj)
    base_feats = feats if sub.L == 0 else init_face_features(sub.base, topos[0].adj)
    return Prepared(sub, topos, feats, base_feats)


# ---------------------------------------------------------------- bottleneck

@dataclass
class BottleneckPayload:
    """What crosses the bottleneck.

    ``triangles`` index sphere-grid points in ``base_graph`` mode and the
    transmitted ``positions`` otherwise. ``sigma`` (source base vertex ->
    grid index) is only kept for aligning training losses.
    """

    codeword: np.ndarray
    triangles: np.ndarray
    mode: str = SEND_BASE_GRAPH
    grid_n: int = 0
    grid_variant: str = FULL_SPHERE
    levels: int = 0
    positions: np.ndarray | None = None
    sigma: MatchingMap | None = None


@dataclass
class IntermediateMeshes:
    input: Mesh
    approx_sphere: Mesh | None
    initial_sphere: Mesh
    recon: Mesh


# ---------------------------------------------------------------- network

class WrappingNet(Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config.validate()
        c = config
        rng = np.random.default_rng(c.seed)
        self.grid = fibonacci_grid(c.grid_n, c.grid_variant)
        dims = [7] + [c.fe_hidden] * (c.fe_layers - 1) + [c.fe_out]
        self.fe = [self.add_child(f"fe.conv{k}", FaceConv(a, b, rng))
                   for k, (a, b) in enumerate(zip(dims[:-1], dims[1:]))]
        self.code_mlp = self.add_child(
            "code_mlp", MLP([c.fe_out] + [c.mlp_hidden] * c.mlp_layers + [c.code_dim], rng))
        self.unwrap = None
        if c.mode != SEND_BASE_MESH:
            self.unwrap = self.add_child("unwrap", DeformationBlock(7, c.unwrap_hidden, rng, c.block_depth))
        self.wrap1 = self.add_child("wrap1", DeformationBlock(7 + c.code_dim, c.wrap_hidden, rng, c.block_depth))
        self.wrap2 = []
        for k in range(c.levels):
            conv = self.add_child(f"wrap2.conv{k}", FaceConv(c.wrap_hidden, c.wrap_hidden, rng))
            f2n = self.add_child(f"wrap2.f2n{k}", Face2Node(c.wrap_hidden, c.wrap_hidden, c.wrap_hidden, rng))
            self.wrap2.append((conv, f2n))
        self._topo_cache: OrderedDict = OrderedDict()

    # parameter groups
    def unwrap_parameters(self) -> dict:
        return {k: v for k, v in self.parameters().items() if k.startswith("unwrap.")}

    def main_parameters(self) -> dict:
        return {k: v for k, v in self.parameters().items() if not k.startswith("unwrap.")}

    def _check_sample(self, prep: Prepared):
        if prep.L != self.config.levels:
            raise ConfigError(f"model expects subdivision level {self.config.levels}, input has {prep.L}")

    # ---- encoder
    def codeword(self, prep: Prepared) -> Tensor:
        self._check_sample(prep)
        F = Tensor(prep.features)
        level = prep.L
        for k, conv in enumerate(self.fe):
            F = ad.relu(face_conv(F, prep.topos[level].adj, conv))
            if k < prep.L:
                F = pool_children(F)
                level -= 1
        return global_mean_pool(self.code_mlp(F))

    def unwrap_forward(self, prep: Prepared) -> Tensor:
        if self.unwrap is None:
            raise ConfigError("this bottleneck mode has no UnWrapping module")
        X, _ = deformation_block_forward(prep.base.positions, prep.base_features, prep.topos[0], self.unwrap)
        return X

    def encode(self, prep: Prepared, keep_graph=False):
        """Return ``(payload, codeword_tensor, approx_sphere_tensor_or_None)``."""
        if not isinstance(prep, Prepared):
            prep = prepare(prep)
        c = self.codeword(prep)
        cfg = self.config
        common = dict(mode=cfg.mode, grid_n=self.grid.N, grid_variant=self.grid.variant, levels=cfg.levels)
        x_as = None
        base = prep.base
        if cfg.mode == SEND_BASE_GRAPH:
            x_as = self.unwrap_forward(prep)
            if base.n_vertices > self.grid.N:
                raise ConfigError(f"mesh has {base.n_vertices} vertices at the matching level; grid N={self.grid.N}")
            sigma = match_to_sphere_grid(x_as.data, self.grid)
            G = canonical_triangles(sigma.sigma[base.triangles])
            payload = BottleneckPayload(c.data[0].copy(), G, sigma=sigma, **common)
        elif cfg.mode == SEND_APPROX_SPHERE:
            x_as = self.unwrap_forward(prep)
            payload = BottleneckPayload(c.data[0].copy(), base.triangles.copy(),
                                        positions=x_as.data.copy(), **common)
        else:
            payload = BottleneckPayload(c.data[0].copy(), base.triangles.copy(),
                                        positions=base.positions.copy(), **common)
        if not keep_graph:
            c, x_as = c.detach(), (None if x_as is None else x_as.detach())
        return payload, c, x_as

    # ---- decoder
    def _decoder_topology(self, payload: BottleneckPayload):
        key = (payload.triangles.tobytes(), payload.positions is None)
        hit = self._topo_cache.get(key)
        if hit is not None:
            self._topo_cache.move_to_end(key)
            return hit
        tri = np.asarray(payload.triangles, dtype=np.int64)
        if payload.positions is None:
            verts = np.unique(tri)
            if verts.size and (verts[0] < 0 or verts[-1] >= self.grid.N):
                raise MeshError(f"base graph references grid indices outside 0..{self.grid.N - 1}")
            local = np.searchsorted(verts, tri)
            n = len(verts)
        else:
            verts = None
            local = tri
            n = len(payload.positions)
        probe = Mesh(self.grid.points[verts] if verts is not None else payload.positions, local)
        rep = validate_manifold(probe)
        if not rep.ok:
            raise MeshError("base graph is not a closed oriented 2-manifold: " + rep.violations[0])
        tris, edges, counts = hierarchy_connectivity(local, n, self.config.levels)
        topos = [Topology.of(t, c) for t, c in zip(tris, counts)]
        entry = (verts, local, edges, topos)
        self._topo_cache[key] = entry
        if len(self._topo_cache) > 256:
            self._topo_cache.popitem(last=False)
        return entry

    def decode(self, payload: BottleneckPayload, codeword=None):
        """Decode to ``(positions tensor, triangles, initial sphere mesh)``.

        ``codeword`` may be passed as a tensor to backpropagate into the encoder.
        """
        self._check_payload(payload)
        verts, local, edges, topos = self._decoder_topology(payload)
        if payload.positions is None:
            p0 = self.grid.points[verts]
        else:
            p0 = np.asarray(payload.positions, dtype=np.float64)
        m_is = Mesh(p0, local)
        feats = init_face_features(m_is, topos[0].adj)
        c = Tensor(payload.codeword[None, :]) if codeword is None else ad.as_tensor(codeword)
        X, H = deformation_block_forward(p0, feats, topos[0], self.wrap1, conditioning=c)
        for lv, (conv, f2n) in enumerate(self.wrap2):
            e = edges[lv]
            mids = (ad.take(X, e[:, 0], axis=0) + ad.take(X, e[:, 1], axis=0)) * 0.5
            X = ad.concat([X, mids], axis=0)
            H = unpool_children(H)
            H = ad.relu(face_conv(H, topos[lv + 1].adj, conv))
            X, H = face2node_forward(X, H, topos[lv + 1], f2n)
        return X, topos[-1].triangles, m_is

    def _check_payload(self, payload):
        cfg = self.config
        if payload.codeword.shape != (cfg.code_dim,):
            raise ConfigError(f"codeword length {payload.codeword.shape} != {cfg.code_dim}")
        if not np.all(np.isfinite(payload.codeword)):
            raise ConfigError("codeword has non-finite entries")
        if payload.levels != cfg.levels:
            raise ConfigError(f"payload levels {payload.levels} != model levels {cfg.levels}")
        if payload.mode != cfg.mode:
            raise ConfigError(f"payload mode {payload.mode} does not match model mode {cfg.mode}")
        if (payload.positions is None) != (payload.mode == SEND_BASE_GRAPH):
            raise ConfigError("positions must be sent exactly when the mode is not base_graph")
        if payload.positions is None and (payload.grid_n, payload.grid_variant) != (self.grid.N, self.grid.variant):
            raise ConfigError("payload sphere grid does not match the model's grid")

    def decode_mesh(self, payload) -> Mesh:
        X, tri, _ = self.decode(payload)
        return Mesh(X.data, tri)

    def reconstruct(self, sample):
        prep = sample if isinstance(sample, Prepared) else prepare(sample)
        payload, c, x_as = self.encode(prep)
        X, tri, m_is = self.decode(payload)
        inter = IntermediateMeshes(prep.fine, None if x_as is None else Mesh(x_as.data, prep.base.triangles),
                                   m_is, Mesh(X.data, tri))
        return payload, inter

    def correspondence(self, prep: Prepared, payload: BottleneckPayload) -> np.ndarray:
        """Map from input fine-vertex index to decoder output vertex index."""
        if payload.positions is not None:
            return np.arange(prep.fine.n_vertices)
        verts = np.unique(payload.triangles)
        base_map = np.searchsorted(verts, payload.sigma.sigma)
        return lift_matching(base_map, prep.subdiv, prep.L)


def interpolate(model: WrappingNet, c1, c2, t: float, payload: BottleneckPayload) -> Mesh:
    """Decode the blend ``(1 - t) c1 + t c2`` on the base graph of ``payload``."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t={t} outside [0, 1]")
    c1, c2 = np.asarray(c1, dtype=np.float64), np.asarray(c2, dtype=np.float64)
    if c1.shape != (model.config.code_dim,) or c2.shape != c1.shape:
        raise ConfigError("codewords must have the model's code length")
    blend = dataclasses.replace(payload, codeword=(1.0 - t) * c1 + t * c2)
    return model.decode_mesh(blend)


# ---------------------------------------------------------------- losses

def reconstruction_loss(target_positions, recon_positions, correspondence=None) -> Tensor:
    """Mean over vertices of squared Euclidean distance after alignment.

    ``correspondence[v]`` is the recon vertex matched with target vertex ``v``.
    """
    tgt = np.asarray(target_positions, dtype=np.float64)
    R = ad.as_tensor(recon_positions)
    if correspondence is None:
        correspondence = np.arange(len(tgt))
    corr = np.asarray(correspondence, dtype=np.int64)
    if len(corr) != len(tgt) or R.shape[0] != len(tgt):
        raise ValueError(f"misaligned vertex counts: target {len(tgt)}, recon {R.shape[0]}")
    aligned = np.empty_like(tgt)
    aligned[corr] = tgt
    d = R - aligned
    return ad.tsum(d * d) * (1.0 / len(tgt))


def sphere_chamfer_loss(points, samples) -> Tensor:
    """Two-sided Chamfer distance between ``points`` (tensor) and fixed ``samples``."""
    from . import kernels
    X = ad.as_tensor(points)
    S = np.ascontiguousarray(samples, dtype=np.float64)
    if X.shape[0] == 0 or len(S) == 0:
        raise ValueError("Chamfer loss needs non-empty sets")
    i_xs, _ = kernels.nearest(X.data, S)
    i_sx, _ = kernels.nearest(S, X.data)
    d1 = X - S[i_xs]
    d2 = ad.take(X, i_sx, axis=0) - S
    return ad.tsum(d1 * d1) * (1.0 / X.shape[0]) + ad.tsum(d2 * d2) * (1.0 / len(S))


# ---------------------------------------------------------------- training

@dataclass
class StepLog:
    step: int
    mse: float = float("nan")
    chamfer: float = float("nan")
    per_mesh_mse: list = field(default_factory=list)


class Trainer:
    """Pretraining (Chamfer only, UnWrapping only) and joint training.

    UnWrapping sees gradients from the sphere Chamfer loss alone; the decoder,
    feature extractor and shared MLP see gradients from the vertex MSE alone.
    """

    def __init__(self, model: WrappingNet, lr: float | None = None):
        self.model = model
        lr = model.config.lr if lr is None else lr
        self.opt_main = Adam(model.main_parameters(), lr=lr)
        self.opt_unwrap = Adam(model.unwrap_parameters(), lr=lr) if model.unwrap is not None else None
        self.step_count = 0
        self.pretrain_count = 0

    def _samples(self, phase: int, step: int, index: int, n: int):
        cfg = self.model.config
        k = cfg.chamfer_samples or n
        return sample_sphere_uniform(k, np.random.SeedSequence([cfg.seed, phase, step, index]))

    def pretrain_step(self, preps) -> StepLog:
        if self.opt_unwrap is None:
            raise ConfigError("this bottleneck mode has no UnWrapping module")
        self.opt_unwrap.zero_grad()
        total = []
        for i, prep in enumerate(preps):
            x = self.model.unwrap_forward(prep)
            loss = sphere_chamfer_loss(x, self._samples(0, self.pretrain_count, i, x.shape[0]))
            _check_finite(loss)
            (loss * (1.0 / len(preps))).backward()
            total.append(float(loss.data))
        self.opt_unwrap.step()
        self.pretrain_count += 1
        return StepLog(self.pretrain_count, chamfer=float(np.mean(total)))

    def train_step(self, preps, chamfer_weight: float = 1.0) -> StepLog:
        model = self.model
        self.opt_main.zero_grad()
        if self.opt_unwrap is not None:
            self.opt_unwrap.zero_grad()
        mses, chs = [], []
        for i, prep in enumerate(preps):
            payload, c, x_as = model.encode(prep, keep_graph=True)
            X, _, _ = model.decode(payload, codeword=c)
            mse = reconstruction_loss(prep.fine.positions, X, model.correspondence(prep, payload))
            loss = mse
            if x_as is not None and chamfer_weight != 0.0:
                ch = sphere_chamfer_loss(x_as, self._samples(1, self.step_count, i, x_as.shape[0]))
                chs.append(float(ch.data))
                loss = loss + ch * chamfer_weight
            _check_finite(loss)
            (loss * (1.0 / len(preps))).backward()
            mses.append(float(mse.data))
        self.opt_main.step()
        if self.opt_unwrap is not None:
            self.opt_unwrap.step()
        self.step_count += 1
        return StepLog(self.step_count, mse=float(np.mean(mses)),
                       chamfer=float(np.mean(chs)) if chs else float("nan"), per_mesh_mse=mses)


def _check_finite(loss: Tensor):
    if not np.all(np.isfinite(loss.data)):
        raise NonFiniteGradient("non-finite loss; step aborted")


def evaluate_mse(model: WrappingNet, preps) -> list:
    out = []
    for prep in preps:
        payload, _, _ = model.encode(prep)
        X, _, _ = model.decode(payload)
        out.append(float(reconstruction_loss(prep.fine.positions, X, model.correspondence(prep, payload)).data))
    return out


def pretrain_unwrap(model: WrappingNet, preps, steps: int, trainer: Trainer | None = None, log=None) -> Trainer:
    trainer = trainer or Trainer(model)
    for _ in range(steps):
        rec = trainer.pretrain_step(preps)
        if log:
            log(rec)
    return trainer
