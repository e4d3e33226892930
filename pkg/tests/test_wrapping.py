import numpy as np
import pytest

from wrapnet.mesh import permute
from wrapnet.wrapping import DeformationBlock, Face2Node, Topology, deformation_block_forward, face2node_forward


def _mlp(layer, x):
    p = {k: v.data for k, v in layer.mlp.parameters().items()}
    return np.maximum(x @ p["W0"] + p["b0"], 0) @ p["W1"] + p["b1"]


def test_face2node_against_per_vertex_loop(octa):
    rng = np.random.default_rng(0)
    layer = Face2Node(3, 2, 5, rng)
    topo = Topology.of(octa.triangles, octa.n_vertices)
    F = rng.normal(size=(octa.n_faces, 3))
    X, H = face2node_forward(octa.positions, F, topo, layer)
    pos, tri = octa.positions, octa.triangles
    deltas = [[] for _ in range(octa.n_vertices)]
    feats = np.zeros((octa.n_faces, 2))
    for i, t in enumerate(tri):
        e = [pos[t[(k + 1) % 3]] - pos[t[k]] for k in range(3)]
        for j in range(3):
            out = _mlp(layer, np.concatenate([F[i], e[j], e[(j + 1) % 3], e[(j + 2) % 3]]))
            deltas[t[j]].append(out[:3])
            feats[i] += out[3:] / 3
    ref = pos + np.array([np.mean(d, axis=0) for d in deltas])
    np.testing.assert_allclose(X.data, ref, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(H.data, feats, rtol=1e-12, atol=1e-14)


def test_face2node_exact_equivariance(torus_mesh):
    rng = np.random.default_rng(1)
    layer = Face2Node(4, 3, 6, rng)
    F = rng.normal(size=(torus_mesh.n_faces, 4))
    topo = Topology.of(torus_mesh.triangles, torus_mesh.n_vertices)
    X, H = face2node_forward(torus_mesh.positions, F, topo, layer)
    for _ in range(5):
        vp, fp = rng.permutation(torus_mesh.n_vertices), rng.permutation(torus_mesh.n_faces)
        pm = permute(torus_mesh, vp, fp)
        Fp = np.empty_like(F)
        Fp[fp] = F
        Xp, Hp = face2node_forward(pm.positions, Fp, Topology.of(pm.triangles, pm.n_vertices), layer)
        assert np.array_equal(Xp.data[vp], X.data)
        assert np.array_equal(Hp.data[fp], H.data)


def test_translation_moves_output_rigidly(ico):
    rng = np.random.default_rng(2)
    layer = Face2Node(2, 2, 4, rng)
    topo = Topology.of(ico.triangles, ico.n_vertices)
    F = rng.normal(size=(ico.n_faces, 2))
    shift = np.array([0.25, -0.5, 1.0])
    X0, H0 = face2node_forward(ico.positions, F, topo, layer)
    X1, H1 = face2node_forward(ico.positions + shift, F, topo, layer)
    np.testing.assert_allclose(X1.data - shift, X0.data, atol=1e-13)
    np.testing.assert_allclose(H1.data, H0.data, atol=1e-13)


def test_block_conditioning_and_shapes(box):
    rng = np.random.default_rng(3)
    blk = DeformationBlock(7 + 4, 6, rng, depth=2)
    topo = Topology.of(box.triangles, box.n_vertices)
    F = rng.normal(size=(box.n_faces, 7))
    c = rng.normal(size=(1, 4))
    X, H = deformation_block_forward(box.positions, F, topo, blk, conditioning=c)
    assert X.shape == (8, 3) and H.shape == (12, 6)
    X2, _ = deformation_block_forward(box.positions, np.concatenate([F, np.repeat(c, 12, 0)], 1), topo, blk)
    assert np.array_equal(X.data, X2.data)
    with pytest.raises(ValueError):
        DeformationBlock(3, 3, rng, depth=0)


def test_shape_errors(tet):
    rng = np.random.default_rng(4)
    layer = Face2Node(2, 2, 2, rng)
    topo = Topology.of(tet.triangles, tet.n_vertices)
    with pytest.raises(ValueError):
        face2node_forward(tet.positions, np.ones((4, 3)), topo, layer)
    with pytest.raises(ValueError):
        face2node_forward(tet.positions[:3], np.ones((4, 2)), topo, layer)


def test_topology_star_rows(ico):
    topo = Topology.of(ico.triangles, ico.n_vertices)
    m = ico.n_faces
    assert topo.star_rows.shape == (12, 5)
    for v in range(12):
        rows = topo.star_rows[v]
        faces, local = rows % m, rows // m
        assert np.all(ico.triangles[faces, local] == v)
    assert np.all(topo.inv_valence == 0.2)


def test_face2node_cyclic_vertex_rotation(torus_mesh):
    rng = np.random.default_rng(21)
    layer = Face2Node(4, 3, 6, rng)
    F = rng.normal(size=(torus_mesh.n_faces, 4))
    X, H = face2node_forward(torus_mesh.positions, F, Topology.of(torus_mesh.triangles, torus_mesh.n_vertices), layer)
    shifts = rng.integers(0, 3, size=torus_mesh.n_faces)
    rolled = np.array([np.roll(t, s) for t, s in zip(torus_mesh.triangles, shifts)])
    X2, H2 = face2node_forward(torus_mesh.positions, F, Topology.of(rolled, torus_mesh.n_vertices), layer)
    np.testing.assert_allclose(X2.data, X.data, rtol=0, atol=1e-14)
    np.testing.assert_allclose(H2.data, H.data, rtol=0, atol=1e-14)
