"""``wrapnet`` command line.

Every command validates its inputs before writing anything, and log lines are
``key=value`` pairs separated by spaces. Configuration precedence is flags,
then the ``--config`` file, then defaults; ``WRAPNET_SEED`` supplies the seed
when neither flag nor file does.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import os
import sys
from pathlib import Path

import numpy as np

from .checkpoint import (CheckpointError, format_config, load_bottleneck, load_checkpoint,
                         load_config_file, save_bottleneck, save_checkpoint, _atomic_write)
from .mesh import MeshError
from .meshio import format_mesh, load_mesh, save_points_off
from .metrics import mesh_metrics
from .model import (MODES, ConfigError, ModelConfig, Trainer, WrappingNet, evaluate_mse, interpolate,
                    prepare)
from .sphere import VARIANTS, default_grid_size, fibonacci_grid
from .subdivision import from_fine
from .synthetic import gen_synthetic, load_dataset


class CliError(Exception):
    pass


def log(stream=None, **kv) -> None:
    parts = []
    for k, v in kv.items():
        if isinstance(v, float):
            v = format(v, ".10g")
        parts.append(f"{k}={v}")
    print(" ".join(parts), file=stream or sys.stdout, flush=True)


# ---------------------------------------------------------------- config plumbing

_MODEL_FIELDS = {f.name: f for f in dataclasses.fields(ModelConfig)}


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file")
    for name in _MODEL_FIELDS:
        flag = "--" + name.replace("_", "-")
        default = getattr(ModelConfig(), name)
        kw = {"type": type(default), "default": None, "dest": name}
        if name == "mode":
            kw["choices"] = MODES
        if name == "grid_variant":
            kw["choices"] = VARIANTS
        p.add_argument(flag, help=f"(default {default})", **kw)


def resolve_config(args, grid_hint: int | None = None) -> tuple[ModelConfig, dict]:
    """Merge defaults, config file and flags; returns the config and the full resolved mapping."""
    file_vals = load_config_file(args.config) if getattr(args, "config", None) else {}
    merged = {}
    for k, v in file_vals.items():
        if k not in _MODEL_FIELDS and k not in ("steps",):
            raise ConfigError(f"unknown config key {k!r} in {args.config}")
        merged[k] = v
    for k in _MODEL_FIELDS:
        v = getattr(args, k, None)
        if v is not None:
            merged[k] = v
    if "seed" not in merged and os.environ.get("WRAPNET_SEED"):
        merged["seed"] = os.environ["WRAPNET_SEED"]
    if "grid_n" not in merged and grid_hint is not None:
        merged["grid_n"] = default_grid_size(grid_hint)
    steps = merged.pop("steps", None)
    if getattr(args, "steps", None) is not None:
        steps = args.steps
    cfg = ModelConfig.from_dict(merged)
    resolved = cfg.to_dict()
    if steps is not None:
        resolved["steps"] = int(steps)
    return cfg, resolved


def _require_file(path, what="input") -> Path:
    p = Path(path)
    if not p.is_file():
        raise CliError(f"{what} file not found: {path}")
    return p


def _require_out_parent(path) -> Path:
    p = Path(path)
    if not p.parent.exists() and str(p.parent) not in ("", "."):
        raise CliError(f"output directory does not exist: {p.parent}")
    return p


def _load_sample(mesh_path, base_path, levels: int):
    """A vanilla mesh, or a subdivision hierarchy when the model expects ``levels > 0``."""
    mesh = load_mesh(_require_file(mesh_path))
    if levels == 0:
        if base_path:
            raise ConfigError("--base given but the model has levels=0")
        return mesh
    if not base_path:
        raise ConfigError(f"model has levels={levels}; a subdivision input needs --base")
    base = load_mesh(_require_file(base_path))
    return from_fine(base.triangles, mesh, levels)


def _dataset(path, levels):
    d = Path(path)
    if not (d / "manifest.csv").is_file() and not d.is_file():
        raise CliError(f"no manifest.csv in dataset {path}")
    entries = load_dataset(d, levels)
    if not entries:
        raise CliError(f"dataset {path} has no entries with levels={levels}")
    return entries


def _sample_of(entry):
    return entry.subdiv if entry.subdiv is not None else entry.mesh


def _matching_size(entries) -> int:
    return max((e.subdiv.base if e.subdiv is not None else e.mesh).n_vertices for e in entries)


# ---------------------------------------------------------------- commands

def cmd_gen_data(args):
    out = Path(args.out)
    if out.exists() and not out.is_dir():
        raise CliError(f"{out} exists and is not a directory")
    seed = _seed(args)
    manifest = gen_synthetic(out, seed=seed, levels=args.levels)
    log(cmd="gen-data", seed=seed, manifest=manifest)


def _seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        return int(args.seed)
    return int(os.environ.get("WRAPNET_SEED", "0"))


def _training_setup(args):
    levels_hint = args.levels if args.levels is not None else None
    file_levels = None
    if args.config:
        file_levels = load_config_file(_require_file(args.config, "config")).get("levels")
    levels = int(levels_hint if levels_hint is not None else (file_levels or 0))
    entries = _dataset(args.dataset, levels)
    cfg, resolved = resolve_config(args, grid_hint=_matching_size(entries))
    if args.init:
        model = load_checkpoint(_require_file(args.init, "checkpoint"))
        if model.config.levels != cfg.levels or model.config.mode != cfg.mode:
            raise ConfigError("--init checkpoint does not match the requested levels/mode")
        cfg = model.config
        resolved.update(cfg.to_dict())
    else:
        model = WrappingNet(cfg)
    preps = [prepare(_sample_of(e)) for e in entries]
    out = Path(args.out_dir)
    if out.exists() and not out.is_dir():
        raise CliError(f"{out} exists and is not a directory")
    return model, preps, resolved, out


def _finish_training(model, resolved, out: Path, extra):
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, out / "model.wnck", extra)
    _atomic_write(out / "config.txt", format_config(resolved).encode("utf-8"))
    log(checkpoint=out / "model.wnck", config=out / "config.txt")


def cmd_pretrain(args):
    model, preps, resolved, out = _training_setup(args)
    steps = resolved.get("steps", model.config.pretrain_steps)
    resolved["steps"] = steps
    print(format_config(resolved), end="")
    trainer = Trainer(model)
    for s in range(steps):
        rec = trainer.pretrain_step(preps)
        if rec.step % args.log_every == 0 or s == steps - 1:
            log(phase="pretrain", step=rec.step, chamfer=rec.chamfer)
    _finish_training(model, resolved, out, {"pretrain_steps": steps})


def cmd_train(args):
    model, preps, resolved, out = _training_setup(args)
    pre = (args.pretrain_steps or 0) if args.init else model.config.pretrain_steps
    if model.unwrap is None:
        pre = 0
    steps = resolved.get("steps", 1000)
    resolved["steps"] = steps
    resolved["pretrain_steps"] = pre
    print(format_config(resolved), end="")
    trainer = Trainer(model)
    for s in range(pre):
        rec = trainer.pretrain_step(preps)
        if rec.step % args.log_every == 0 or s == pre - 1:
            log(phase="pretrain", step=rec.step, chamfer=rec.chamfer)
    log(phase="init", step=0, mse=float(np.mean(evaluate_mse(model, preps))))
    for s in range(steps):
        rec = trainer.train_step(preps)
        if rec.step % args.log_every == 0 or s == steps - 1:
            log(phase="train", step=rec.step, mse=rec.mse, chamfer=rec.chamfer)
    _finish_training(model, resolved, out, {"pretrain_steps": pre, "train_steps": steps})


def cmd_encode(args):
    model = load_checkpoint(_require_file(args.ckpt, "checkpoint"))
    sample = _load_sample(args.mesh, args.base, model.config.levels)
    out = _require_out_parent(args.out)
    payload, _, _ = model.encode(prepare(sample))
    save_bottleneck(payload, out)
    log(cmd="encode", mode=payload.mode, faces=len(payload.triangles), out=out)


def cmd_decode(args):
    model = load_checkpoint(_require_file(args.ckpt, "checkpoint"))
    payload = load_bottleneck(_require_file(args.bottleneck, "bottleneck"))
    out = _require_out_parent(args.out)
    mesh = model.decode_mesh(payload)
    _atomic_write(out, format_mesh(mesh, out.suffix.lstrip(".") or "off").encode("utf-8"))
    log(cmd="decode", vertices=mesh.n_vertices, faces=mesh.n_faces, out=out)


def cmd_reconstruct(args):
    model = load_checkpoint(_require_file(args.ckpt, "checkpoint"))
    sample = _load_sample(args.mesh, args.base, model.config.levels)
    out = _require_out_parent(args.out)
    if args.bottleneck_out:
        _require_out_parent(args.bottleneck_out)
    payload, _, _ = model.encode(prepare(sample))
    mesh = model.decode_mesh(payload)
    if args.bottleneck_out:
        save_bottleneck(payload, args.bottleneck_out)
    _atomic_write(out, format_mesh(mesh, out.suffix.lstrip(".") or "off").encode("utf-8"))
    log(cmd="reconstruct", vertices=mesh.n_vertices, faces=mesh.n_faces, out=out)


def cmd_interpolate(args):
    model = load_checkpoint(_require_file(args.ckpt, "checkpoint"))
    p1 = load_bottleneck(_require_file(args.source, "bottleneck"))
    p2 = load_bottleneck(_require_file(args.target, "bottleneck"))
    graph = load_bottleneck(_require_file(args.graph, "bottleneck")) if args.graph else p1
    ts = [float(t) for t in args.t]
    for t in ts:
        if not 0.0 <= t <= 1.0:
            raise CliError(f"t={t} outside [0, 1]")
    out_dir = Path(args.out_dir)
    if out_dir.exists() and not out_dir.is_dir():
        raise CliError(f"{out_dir} is not a directory")
    meshes = [(t, interpolate(model, p1.codeword, p2.codeword, t, graph)) for t in ts]
    out_dir.mkdir(parents=True, exist_ok=True)
    for k, (t, mesh) in enumerate(meshes):
        path = out_dir / f"interp_{k:03d}.off"
        _atomic_write(path, format_mesh(mesh, "off").encode("utf-8"))
        log(cmd="interpolate", t=t, out=path)


def cmd_eval_metrics(args):
    rows = []
    if args.dataset:
        if not args.ckpt:
            raise CliError("--dataset needs --ckpt")
        model = load_checkpoint(_require_file(args.ckpt, "checkpoint"))
        entries = _dataset(args.dataset, model.config.levels)
        pairs = []
        for e in entries:
            prep = prepare(_sample_of(e))
            _, inter = model.reconstruct(prep)
            pairs.append((e.name, prep.fine, inter.recon))
    else:
        if not args.truth or not args.recon or len(args.truth) != len(args.recon):
            raise CliError("give matching --truth/--recon lists or --dataset with --ckpt")
        pairs = [(Path(t).stem, load_mesh(_require_file(t)), load_mesh(_require_file(r)))
                 for t, r in zip(args.truth, args.recon)]
    out = _require_out_parent(args.out) if args.out else None
    for name, truth, recon in pairs:
        m = mesh_metrics(truth, recon)
        rows.append((name, m))
        log(mesh=name, CD=m["CD"], NE=m["NE"], CP=m["CP"])
    if out:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["mesh_id", "CD", "NE", "CP"])
        for name, m in rows:
            w.writerow([name] + [format(float(m[k]), ".17g") for k in ("CD", "NE", "CP")])
        _atomic_write(out, buf.getvalue().encode("utf-8"))


def export_codewords_text(model: WrappingNet, entries) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["mesh_id", "label"] + [f"c{k}" for k in range(model.config.code_dim)])
    for e in entries:
        c = model.codeword(prepare(_sample_of(e))).data[0]
        w.writerow([e.name, e.label] + [format(float(x), ".17g") for x in c])
    return buf.getvalue()


def cmd_export_codewords(args):
    model = load_checkpoint(_require_file(args.ckpt, "checkpoint"))
    entries = _dataset(args.dataset, model.config.levels)
    out = _require_out_parent(args.out)
    text = export_codewords_text(model, entries)
    _atomic_write(out, text.encode("utf-8"))
    log(cmd="export-codewords", rows=len(entries), columns=model.config.code_dim, out=out)


def cmd_grad_check(args):
    from .gradcheck import run_layer_checks
    ok = True
    for name, report in run_layer_checks(seed=_seed(args), instances=args.instances):
        log(layer=name, ok=int(report.ok), max_rel_error=max(report.rel_errors), kink_margin=report.kink_margin)
        ok &= report.ok
    if not ok:
        raise CliError("gradient check failed")


def cmd_dump_grid(args):
    grid = fibonacci_grid(args.n, args.variant)
    out = _require_out_parent(args.out)
    if out.suffix == ".csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y", "z"])
        w.writerows([[format(float(v), ".17g") for v in row] for row in grid.points])
        _atomic_write(out, buf.getvalue().encode("utf-8"))
    else:
        save_points_off(grid.points, out)
    log(cmd="dump-grid", n=grid.N, variant=grid.variant, out=out)


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wrapnet", description="Mesh autoencoder with sphere unwrapping.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write the synthetic mesh set")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--levels", type=int, default=3)
    p.set_defaults(func=cmd_gen_data)

    for name, func, help_ in (("pretrain-unwrap", cmd_pretrain, "Chamfer-only UnWrapping pretraining"),
                              ("train", cmd_train, "pretraining followed by joint training")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--dataset", required=True)
        p.add_argument("--out-dir", required=True)
        p.add_argument("--steps", type=int)
        p.add_argument("--init", help="start from this checkpoint")
        p.add_argument("--log-every", type=int, default=50)
        _add_model_flags(p)
        p.set_defaults(func=func)

    p = sub.add_parser("encode", help="mesh -> bottleneck file")
    p.add_argument("--mesh", required=True)
    p.add_argument("--base", help="base mesh when the model uses subdivision levels")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="bottleneck file -> mesh")
    p.add_argument("--bottleneck", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("reconstruct", help="encode then decode")
    p.add_argument("--mesh", required=True)
    p.add_argument("--base")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bottleneck-out")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("interpolate", help="decode blends of two codewords")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--from", dest="source", required=True, help="bottleneck file of the first shape")
    p.add_argument("--to", dest="target", required=True, help="bottleneck file of the second shape")
    p.add_argument("--graph", help="bottleneck whose base graph is used (default: --from)")
    p.add_argument("--t", nargs="+", default=["0", "0.25", "0.5", "0.75", "1"])
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_interpolate)

    p = sub.add_parser("eval-metrics", help="CD / NE / CP")
    p.add_argument("--truth", nargs="*")
    p.add_argument("--recon", nargs="*")
    p.add_argument("--dataset")
    p.add_argument("--ckpt")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval_metrics)

    p = sub.add_parser("export-codewords", help="codeword CSV with labels")
    p.add_argument("--dataset", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_codewords)

    p = sub.add_parser("grad-check", help="finite-difference check of every layer")
    p.add_argument("--seed", type=int)
    p.add_argument("--instances", type=int, default=5)
    p.set_defaults(func=cmd_grad_check)

    p = sub.add_parser("dump-grid", help="write the Fibonacci sphere grid")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--variant", choices=VARIANTS, default=VARIANTS[0])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dump_grid)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
    except (CliError, ConfigError, MeshError, CheckpointError, OSError, ValueError) as exc:
        log(sys.stderr, error=type(exc).__name__, message=repr(str(exc)))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
