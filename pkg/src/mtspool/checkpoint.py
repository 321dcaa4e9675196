"""Self-describing binary checkpoints.

Layout (all integers little-endian uint32, all floats little-endian float64):

    bytes 0-7   magic  b"MTSPOOL1"
    u32 + bytes config JSON (canonical: sorted keys, compact separators)
    u32 + bytes extras JSON {"adam_step": int|null, "best_metric": float|null,
                             "epoch": int}
    u32         array count
    per array, in ascending name order:
        u32 + bytes  name (utf-8)
        u32          ndim
        u32 * ndim   dims
        float64[...] data, C order

Array name prefixes: ``param/`` trainable parameters, ``norm/`` running
batch-norm statistics, ``adam/m/`` and ``adam/v/`` optimizer moments.
Loading rebuilds the model from the stored config and validates every stored
shape against it, so a load -> save round trip is byte-identical.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .model import GraphPoolModel, ModelConfig
from .train import Adam

MAGIC = b"MTSPOOL1"


@dataclass
class Checkpoint:
    config: dict
    epoch: int
    best_metric: float | None
    adam_step: int | None
    arrays: dict[str, np.ndarray]


def _canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _collect_arrays(model: GraphPoolModel, optimizer: Adam | None) -> dict[str, np.ndarray]:
    arrays: dict[str, np.ndarray] = {}
    for name, p in model.parameters().items():
        arrays[f"param/{name}"] = p.data
    for name, state in model.norm_states().items():
        arrays[f"norm/{name}/running_mean"] = state.running_mean
        arrays[f"norm/{name}/running_var"] = state.running_var
    if optimizer is not None:
        for name in optimizer.params:
            arrays[f"adam/m/{name}"] = optimizer.m[name]
            arrays[f"adam/v/{name}"] = optimizer.v[name]
    return arrays


def _write_blob(fh, payload: bytes) -> None:
    fh.write(struct.pack("<I", len(payload)))
    fh.write(payload)


def save_checkpoint(
    path,
    model: GraphPoolModel,
    optimizer: Adam | None = None,
    epoch: int = 0,
    best_metric: float | None = None,
) -> None:
    arrays = _collect_arrays(model, optimizer)
    extras = {
        "epoch": epoch,
        "best_metric": best_metric,
        "adam_step": optimizer.step_count if optimizer is not None else None,
    }
    _write_raw(path, model.config.to_dict(), extras, arrays)


def _write_raw(path, config: dict, extras: dict, arrays: dict[str, np.ndarray]) -> None:
    # Atomic replace: write to a sibling temp file first.
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(MAGIC)
            _write_blob(fh, _canonical_json(config))
            _write_blob(fh, _canonical_json(extras))
            fh.write(struct.pack("<I", len(arrays)))
            for name in sorted(arrays):
                arr = np.ascontiguousarray(arrays[name], dtype="<f8")
                _write_blob(fh, name.encode("utf-8"))
                fh.write(struct.pack("<I", arr.ndim))
                fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
                fh.write(arr.tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_exact(fh, count: int) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise ContractError("checkpoint truncated")
    return data


def _read_blob(fh) -> bytes:
    (length,) = struct.unpack("<I", _read_exact(fh, 4))
    return _read_exact(fh, length)


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        if _read_exact(fh, 8) != MAGIC:
            raise ContractError(f"{path} is not a checkpoint file")
        config = json.loads(_read_blob(fh))
        extras = json.loads(_read_blob(fh))
        (count,) = struct.unpack("<I", _read_exact(fh, 4))
        arrays: dict[str, np.ndarray] = {}
        for _ in range(count):
            name = _read_blob(fh).decode("utf-8")
            (ndim,) = struct.unpack("<I", _read_exact(fh, 4))
            shape = struct.unpack(f"<{ndim}I", _read_exact(fh, 4 * ndim))
            size = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(_read_exact(fh, 8 * size), dtype="<f8").reshape(shape)
            arrays[name] = data.copy()
    return Checkpoint(
        config=config,
        epoch=extras["epoch"],
        best_metric=extras["best_metric"],
        adam_step=extras["adam_step"],
        arrays=arrays,
    )


def resave_checkpoint(path, checkpoint: Checkpoint) -> None:
    """Write a loaded checkpoint back out (used by the round-trip tests)."""
    extras = {
        "epoch": checkpoint.epoch,
        "best_metric": checkpoint.best_metric,
        "adam_step": checkpoint.adam_step,
    }
    _write_raw(path, checkpoint.config, extras, checkpoint.arrays)


def build_model(checkpoint: Checkpoint) -> GraphPoolModel:
    """Rebuild the model from a checkpoint, validating every stored shape."""
    config = ModelConfig.from_dict(checkpoint.config)
    model = GraphPoolModel(config)
    params = model.parameters()
    for name, p in params.items():
        key = f"param/{name}"
        if key not in checkpoint.arrays:
            raise ContractError(f"checkpoint is missing {key}")
        stored = checkpoint.arrays[key]
        if stored.shape != p.data.shape:
            raise ContractError(
                f"checkpoint shape {stored.shape} for {key} does not match"
                f" configured {p.data.shape}"
            )
        p.data = stored.copy()
    for name, state in model.norm_states().items():
        for stat in ("running_mean", "running_var"):
            key = f"norm/{name}/{stat}"
            if key not in checkpoint.arrays:
                raise ContractError(f"checkpoint is missing {key}")
            stored = checkpoint.arrays[key]
            if stored.shape != getattr(state, stat).shape:
                raise ContractError(f"checkpoint shape mismatch for {key}")
            setattr(state, stat, stored.copy())
    expected = {f"param/{n}" for n in params}
    for name in model.norm_states():
        expected.add(f"norm/{name}/running_mean")
        expected.add(f"norm/{name}/running_var")
    stored = {k for k in checkpoint.arrays if k.startswith(("param/", "norm/"))}
    if stored - expected:
        raise ContractError(f"checkpoint has unexpected arrays: {sorted(stored - expected)}")
    return model


def restore_optimizer(checkpoint: Checkpoint, model: GraphPoolModel, lr: float) -> Adam | None:
    if checkpoint.adam_step is None:
        return None
    opt = Adam(model.parameters(), lr=lr)
    opt.step_count = checkpoint.adam_step
    for name in opt.params:
        opt.m[name] = checkpoint.arrays[f"adam/m/{name}"].copy()
        opt.v[name] = checkpoint.arrays[f"adam/v/{name}"].copy()
    return opt
