"""Checkpoint (``.wnck``), bottleneck (``.wnb``) and flat ``key=value`` config files.

A checkpoint is one ASCII line ``WNCK <version> <header bytes>``, a UTF-8 JSON
header (config, parameter manifest, format version), then raw little-endian
float64 parameter payloads in manifest order.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .assignment import MatchingMap
from .model import MODES, SEND_BASE_GRAPH, BottleneckPayload, ConfigError, ModelConfig, WrappingNet

FORMAT_VERSION = 1
_MAGIC = "WNCK"
_DTYPE = "<f8"


class CheckpointError(ValueError):
    pass


def _atomic_write(path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def checkpoint_bytes(model: WrappingNet, extra: dict | None = None) -> bytes:
    params = model.parameters()
    manifest, offset, chunks = [], 0, []
    for name in sorted(params):
        arr = np.ascontiguousarray(params[name].data, dtype=_DTYPE)
        manifest.append({"name": name, "shape": list(arr.shape), "dtype": "float64-le", "offset": offset})
        chunks.append(arr.tobytes())
        offset += arr.nbytes
    header = json.dumps({"version": FORMAT_VERSION, "config": model.config.to_dict(),
                         "manifest": manifest, "payload_bytes": offset, "extra": extra or {}},
                        sort_keys=True).encode("utf-8")
    return f"{_MAGIC} {FORMAT_VERSION} {len(header)}\n".encode("ascii") + header + b"".join(chunks)


def save_checkpoint(model: WrappingNet, path, extra: dict | None = None) -> None:
    _atomic_write(path, checkpoint_bytes(model, extra))


def read_checkpoint(path):
    """Return ``(header dict, {name: array})`` after checking sizes against the file length."""
    raw = Path(path).read_bytes()
    nl = raw.find(b"\n")
    if nl < 0:
        raise CheckpointError("missing checkpoint preamble")
    parts = raw[:nl].decode("ascii", "replace").split()
    if len(parts) != 3 or parts[0] != _MAGIC:
        raise CheckpointError("not a wrapnet checkpoint")
    if parts[1] != str(FORMAT_VERSION):
        raise CheckpointError(f"unsupported checkpoint version {parts[1]}")
    try:
        hlen = int(parts[2])
        header = json.loads(raw[nl + 1:nl + 1 + hlen].decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint header: {exc}") from None
    body = raw[nl + 1 + hlen:]
    total = 0
    arrays = {}
    for entry in header["manifest"]:
        if entry["offset"] != total or entry["dtype"] != "float64-le":
            raise CheckpointError(f"manifest entry {entry['name']} is inconsistent")
        count = int(np.prod(entry["shape"], dtype=np.int64))
        nbytes = 8 * count
        if total + nbytes > len(body):
            raise CheckpointError("checkpoint truncated")
        arrays[entry["name"]] = np.frombuffer(body, dtype=_DTYPE, count=count,
                                              offset=total).reshape(entry["shape"]).astype(np.float64)
        total += nbytes
    if total != header.get("payload_bytes") or total != len(body):
        raise CheckpointError(f"payload size mismatch: manifest {total}, file {len(body)}")
    return header, arrays


def load_checkpoint(path) -> WrappingNet:
    header, arrays = read_checkpoint(path)
    try:
        model = WrappingNet(ModelConfig.from_dict(header["config"]))
    except (ConfigError, TypeError) as exc:
        raise CheckpointError(f"bad config in checkpoint: {exc}") from None
    params = model.parameters()
    if set(params) != set(arrays):
        raise CheckpointError("checkpoint parameters do not match the architecture")
    for name, p in params.items():
        if p.shape != arrays[name].shape:
            raise CheckpointError(f"shape mismatch for {name}")
        p.data[...] = arrays[name]
    return model


# ---------------------------------------------------------------- bottleneck

def _fmt(x) -> str:
    return format(float(x), ".17g")


def bottleneck_text(p: BottleneckPayload) -> str:
    lines = ["WNB 1", f"mode {p.mode}", f"grid_n {p.grid_n}", f"grid_variant {p.grid_variant}",
             f"levels {p.levels}", f"code_dim {len(p.codeword)}",
             "codeword " + " ".join(_fmt(x) for x in p.codeword),
             f"triangles {len(p.triangles)}"]
    lines += [f"{a} {b} {c}" for a, b, c in np.asarray(p.triangles)]
    if p.positions is not None:
        lines.append(f"positions {len(p.positions)}")
        lines += [" ".join(_fmt(x) for x in row) for row in p.positions]
    if p.sigma is not None:
        lines.append("sigma " + " ".join(str(int(s)) for s in p.sigma.sigma))
    return "\n".join(lines) + "\n"


def save_bottleneck(p: BottleneckPayload, path) -> None:
    _atomic_write(path, bottleneck_text(p).encode("utf-8"))


def parse_bottleneck(text: str) -> BottleneckPayload:
    lines = text.splitlines()
    pos = 0

    def take(key):
        nonlocal pos
        if pos >= len(lines):
            raise CheckpointError(f"bottleneck file ends before {key!r}")
        head, _, rest = lines[pos].partition(" ")
        if head != key:
            raise CheckpointError(f"expected {key!r} on line {pos + 1}, got {head!r}")
        pos += 1
        return rest

    try:
        if lines[:1] != ["WNB 1"]:
            raise CheckpointError("not a version-1 bottleneck file")
        pos = 1
        mode = take("mode")
        if mode not in MODES:
            raise CheckpointError(f"unknown mode {mode!r}")
        grid_n = int(take("grid_n"))
        variant = take("grid_variant")
        levels = int(take("levels"))
        dim = int(take("code_dim"))
        code = np.array([float(x) for x in take("codeword").split()], dtype=np.float64)
        if len(code) != dim:
            raise CheckpointError(f"codeword has {len(code)} values, header says {dim}")
        nt = int(take("triangles"))
        tri = np.array([[int(v) for v in lines[pos + k].split()] for k in range(nt)], dtype=np.int64)
        pos += nt
        if tri.shape != (nt, 3):
            raise CheckpointError("triangle rows must have three indices")
        positions = sigma = None
        if pos < len(lines) and lines[pos].startswith("positions"):
            nv = int(take("positions"))
            positions = np.array([[float(v) for v in lines[pos + k].split()] for k in range(nv)])
            pos += nv
            if positions.shape != (nv, 3):
                raise CheckpointError("position rows must have three values")
        if pos < len(lines) and lines[pos].startswith("sigma"):
            sigma = MatchingMap(np.array([int(v) for v in take("sigma").split()], dtype=np.int64))
        if any(line.strip() for line in lines[pos:]):
            raise CheckpointError(f"unexpected content on line {pos + 1}")
    except IndexError:
        raise CheckpointError("bottleneck file is truncated") from None
    except ValueError as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise CheckpointError(f"malformed bottleneck file: {exc}") from None
    if (positions is None) != (mode == SEND_BASE_GRAPH):
        raise CheckpointError("positions must be present exactly when mode is not base_graph")
    return BottleneckPayload(code, tri, mode=mode, grid_n=grid_n, grid_variant=variant,
                             levels=levels, positions=positions, sigma=sigma)


def load_bottleneck(path) -> BottleneckPayload:
    return parse_bottleneck(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------- config files

def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment; later keys win."""
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"config line {n}: expected key=value")
        out[key.strip()] = value.strip()
    return out


def load_config_file(path) -> dict:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


def format_config(d: dict) -> str:
    return "".join(f"{k}={v}\n" for k, v in sorted(d.items()))
