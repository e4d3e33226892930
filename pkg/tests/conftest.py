import numpy as np
import pytest

from wrapnet import _pykernels, kernels
from wrapnet.mesh import Mesh
from wrapnet.synthetic import cube, icosahedron, octahedron, tetrahedron, torus


def _backends():
    out = [pytest.param(_pykernels, id="python")]
    try:
        from wrapnet import _kernels
        out.append(pytest.param(_kernels, id="cython"))
    except ImportError:  # pragma: no cover - extension not built
        out.append(pytest.param(None, id="cython", marks=pytest.mark.skip("extension not built")))
    return out


BACKENDS = _backends()


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Route every kernel call through one implementation for the duration of a test."""
    mod = request.param
    for name in ("lsap", "nearest", "adam_update", "scatter_add_rows", "face_conv_stack", "face_conv_stack_back"):
        monkeypatch.setattr(kernels, name, getattr(mod, name))
    return mod


@pytest.fixture
def tet():
    return tetrahedron()


@pytest.fixture
def ico():
    return icosahedron()


@pytest.fixture
def octa():
    return octahedron()


@pytest.fixture
def box():
    return cube()


@pytest.fixture
def torus_mesh():
    return torus(6, 4, 1.0, 0.4)


def regular_tetrahedron(edge=1.0) -> Mesh:
    v = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=np.float64)
    v *= edge / np.linalg.norm(v[0] - v[1])
    return Mesh(v, tetrahedron().triangles)


def random_perms(rng, mesh):
    return rng.permutation(mesh.n_vertices), rng.permutation(mesh.n_faces)


TINY = dict(fe_hidden=8, fe_out=16, mlp_hidden=16, mlp_layers=1, code_dim=8, unwrap_hidden=8, wrap_hidden=8)


def tiny_config(**kw):
    """A narrow model that keeps unit tests fast; the architecture is otherwise unchanged."""
    from wrapnet.model import ModelConfig
    return ModelConfig(**{**TINY, **kw})


# ---------------------------------------------------------------- acceptance summary

_ACCEPTANCE: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or not (rep.when == "call" or rep.failed):
        return
    number, title = mark.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    prev_ok, _, prev_detail = _ACCEPTANCE.get(number, (True, title, ""))
    detail = " | ".join(d for d in (prev_detail, detail) if d)
    _ACCEPTANCE[number] = (rep.passed and prev_ok, title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        ok, title, detail = _ACCEPTANCE[number]
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
