import csv

import numpy as np
import pytest

from conftest import TINY
from wrapnet.checkpoint import load_bottleneck, load_checkpoint
from wrapnet.cli import main
from wrapnet.meshio import load_mesh

FLAGS = [arg for k, v in TINY.items() for arg in ("--" + k.replace("_", "-"), str(v))]


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["gen-data", "--out", str(root / "data"), "--seed", "1", "--levels", "1"]) == 0
    rc = main(["train", "--dataset", str(root / "data"), "--out-dir", str(root / "run"), "--steps", "2",
               "--pretrain-steps", "2", "--log-every", "1"] + FLAGS)
    assert rc == 0
    return root


def test_train_outputs(trained, capsys):
    cfg = (trained / "run" / "config.txt").read_text()
    assert "steps=2\n" in cfg and "pretrain_steps=2\n" in cfg and "grid_n=704\n" in cfg
    model = load_checkpoint(trained / "run" / "model.wnck")
    assert model.config.code_dim == 8


def test_encode_decode_reconstruct(trained, capsys):
    d, ck = trained / "data", str(trained / "run" / "model.wnck")
    assert main(["encode", "--mesh", str(d / "torus_0.off"), "--ckpt", ck, "--out", str(trained / "t.wnb")]) == 0
    assert main(["decode", "--bottleneck", str(trained / "t.wnb"), "--ckpt", ck, "--out", str(trained / "t.obj")]) == 0
    assert main(["reconstruct", "--mesh", str(d / "torus_0.off"), "--ckpt", ck, "--out", str(trained / "r.obj"),
                 "--bottleneck-out", str(trained / "r.wnb")]) == 0
    assert load_mesh(trained / "t.obj") == load_mesh(trained / "r.obj")
    assert (trained / "t.wnb").read_text() == (trained / "r.wnb").read_text()
    assert "cmd=decode" in capsys.readouterr().out


def test_interpolate_and_export(trained):
    d, ck = trained / "data", str(trained / "run" / "model.wnck")
    for name in ("torus_0", "icosphere_1"):
        assert main(["encode", "--mesh", str(d / f"{name}.off"), "--ckpt", ck, "--out", str(trained / f"{name}.wnb")]) == 0
    out = trained / "interp"
    assert main(["interpolate", "--ckpt", ck, "--from", str(trained / "torus_0.wnb"),
                 "--to", str(trained / "icosphere_1.wnb"), "--t", "0", "1", "--out-dir", str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["interp_000.off", "interp_001.off"]
    assert main(["export-codewords", "--dataset", str(d), "--ckpt", ck, "--out", str(trained / "c.csv")]) == 0
    rows = list(csv.reader(open(trained / "c.csv")))
    assert rows[0][:3] == ["mesh_id", "label", "c0"] and len(rows) == 11 and len(rows[1]) == 10
    cw = load_bottleneck(trained / "torus_0.wnb").codeword
    torus_row = next(r for r in rows if r[0] == "torus_0")
    assert np.array_equal(np.array(torus_row[2:], dtype=float), cw)


def test_eval_metrics(trained):
    d = trained / "data"
    out = trained / "m.csv"
    assert main(["eval-metrics", "--truth", str(d / "box_0.off"), "--recon", str(d / "box_0.off"),
                 "--out", str(out)]) == 0
    rows = list(csv.reader(open(out)))
    assert rows[0] == ["mesh_id", "CD", "NE", "CP"] and float(rows[1][1]) == 0.0


def test_dump_grid(tmp_path):
    assert main(["dump-grid", "--n", "10", "--out", str(tmp_path / "g.csv")]) == 0
    pts = np.loadtxt(tmp_path / "g.csv", delimiter=",", skiprows=1)
    assert pts.shape == (10, 3) and pts[0].tolist() == [0.0, 1.0, 0.0]


@pytest.mark.parametrize("argv", [
    ["decode", "--bottleneck", "missing.wnb", "--ckpt", "missing.wnck", "--out", "x.off"],
    ["dump-grid", "--n", "1", "--out", "g.off"],
    ["dump-grid", "--n", "5", "--out", "no/such/dir/g.off"],
    ["eval-metrics"],
])
def test_errors_exit_nonzero(tmp_path, monkeypatch, capsys, argv):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 1
    assert "error=" in capsys.readouterr().err
    assert list(tmp_path.iterdir()) == []


def test_usage_error():
    assert main(["no-such-command"]) == 2


def test_config_precedence(tmp_path, monkeypatch):
    from wrapnet.cli import build_parser, resolve_config
    cfg_file = tmp_path / "c.txt"
    cfg_file.write_text("lr = 0.001\nseed = 4\nsteps = 7\n")
    args = build_parser().parse_args(["train", "--dataset", "d", "--out-dir", "o", "--config", str(cfg_file),
                                      "--seed", "9"])
    monkeypatch.setenv("WRAPNET_SEED", "11")
    cfg, resolved = resolve_config(args, grid_hint=100)
    assert (cfg.lr, cfg.seed, cfg.grid_n, resolved["steps"]) == (0.001, 9, 128, 7)
    args = build_parser().parse_args(["train", "--dataset", "d", "--out-dir", "o"])
    assert resolve_config(args)[0].seed == 11
