import numpy as np
import pytest

from conftest import tiny_config
from wrapnet.checkpoint import (CheckpointError, bottleneck_text, checkpoint_bytes, format_config, load_bottleneck,
                                load_checkpoint, parse_bottleneck, parse_config_text, read_checkpoint,
                                save_bottleneck, save_checkpoint)
from wrapnet.model import SEND_APPROX_SPHERE, ConfigError, WrappingNet, prepare
from wrapnet.synthetic import torus


@pytest.fixture(scope="module")
def model():
    return WrappingNet(tiny_config(seed=5))


def test_checkpoint_round_trip_bit_exact(tmp_path, model):
    path = tmp_path / "m.wnck"
    save_checkpoint(model, path, {"note": 1})
    header, arrays = read_checkpoint(path)
    assert header["extra"] == {"note": 1} and header["version"] == 1
    again = load_checkpoint(path)
    assert again.config == model.config
    for name, p in model.parameters().items():
        assert np.array_equal(again.parameters()[name].data, p.data)
    assert checkpoint_bytes(again, {"note": 1}) == path.read_bytes()


def test_checkpoint_corruption(tmp_path, model):
    raw = checkpoint_bytes(model)
    cases = {"trunc": raw[:-8], "magic": b"XXXX" + raw[4:], "extra": raw + b"\0" * 8,
             "version": raw.replace(b"WNCK 1", b"WNCK 9", 1), "empty": b""}
    for name, data in cases.items():
        p = tmp_path / name
        p.write_bytes(data)
        with pytest.raises(CheckpointError):
            load_checkpoint(p)


def test_bottleneck_round_trip(tmp_path, model):
    payload, _, _ = model.encode(prepare(torus(5, 3)))
    path = tmp_path / "b.wnb"
    save_bottleneck(payload, path)
    back = load_bottleneck(path)
    assert np.array_equal(back.codeword, payload.codeword)
    assert np.array_equal(back.triangles, payload.triangles)
    assert np.array_equal(back.sigma.sigma, payload.sigma.sigma)
    assert bottleneck_text(back) == path.read_text()
    assert np.array_equal(model.decode_mesh(back).positions, model.decode_mesh(payload).positions)


def test_bottleneck_with_positions():
    m = WrappingNet(tiny_config(mode=SEND_APPROX_SPHERE))
    payload, _, _ = m.encode(prepare(torus(5, 3)))
    back = parse_bottleneck(bottleneck_text(payload))
    assert np.array_equal(back.positions, payload.positions)


@pytest.mark.parametrize("text", ["", "WNB 2\n", "WNB 1\nmode nope\n",
                                  "WNB 1\nmode base_graph\ngrid_n 4\ngrid_variant full\nlevels 0\ncode_dim 2\ncodeword 1\n",
                                  "WNB 1\nmode base_graph\ngrid_n 4\ngrid_variant full\nlevels 0\ncode_dim 1\ncodeword 1\n"
                                  "triangles 2\n0 1 2\n"])
def test_bottleneck_rejections(text):
    with pytest.raises(CheckpointError):
        parse_bottleneck(text)


def test_config_text():
    d = parse_config_text("# comment\nlevels = 3\nlr=1e-4  # trailing\n\nlevels=2\n")
    assert d == {"levels": "2", "lr": "1e-4"}
    assert format_config({"b": 1, "a": 2}) == "a=2\nb=1\n"
    with pytest.raises(ConfigError):
        parse_config_text("just words\n")
