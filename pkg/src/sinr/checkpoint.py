"""Checkpoint container: training config, mask, and f64 parameters.

Layout: magic ``SNC1``, u32 manifest length, UTF-8 JSON manifest, then
a contiguous float64 payload. The manifest records the training config
and the (name, shape, offset) of every parameter plus the coded
aperture, so loading rebuilds the exact model and reproduces metrics
bit-for-bit.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from pathlib import Path

import numpy as np

from .cassi import Mask
from .params import from_named, named_arrays
from .training import TrainConfig, TrainResult, init_model_params

__all__ = ["CheckpointError", "save_checkpoint", "load_checkpoint"]

MAGIC = b"SNC1"


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, result: TrainResult) -> None:
    entries = list(named_arrays(result.params))
    entries.append(("mask", result.mask.values))
    manifest_params = []
    chunks = []
    offset = 0
    for name, arr in entries:
        manifest_params.append(
            {"name": name, "shape": list(arr.shape), "offset": offset}
        )
        raw = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        chunks.append(raw)
        offset += len(raw)
    config = dataclasses.asdict(result.config)
    config["eval_scales"] = list(config["eval_scales"])
    manifest = json.dumps(
        {"config": config, "params": manifest_params}, sort_keys=True
    ).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(manifest)))
        fh.write(manifest)
        for raw in chunks:
            fh.write(raw)


def load_checkpoint(path) -> TrainResult:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise CheckpointError(f"bad checkpoint magic {raw[:4]!r}")
    (mlen,) = struct.unpack_from("<I", raw, 4)
    manifest = json.loads(raw[8:8 + mlen].decode())
    payload = raw[8 + mlen:]
    cfg_dict = manifest["config"]
    cfg_dict["eval_scales"] = tuple(cfg_dict["eval_scales"])
    config = TrainConfig(**cfg_dict)
    arrays = {}
    for entry in manifest["params"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        end = start + 8 * count
        if end > len(payload):
            raise CheckpointError(
                f"payload truncated: parameter {entry['name']} needs bytes "
                f"up to {end}, payload has {len(payload)}"
            )
        arrays[entry["name"]] = (
            np.frombuffer(payload, dtype="<f8", count=count, offset=start)
            .reshape(shape)
            .copy()
        )
    mask = Mask(arrays.pop("mask"))
    template = init_model_params(config, np.random.default_rng(0))
    for name, arr in named_arrays(template):
        if name not in arrays:
            raise CheckpointError(f"checkpoint is missing parameter {name}")
        if arrays[name].shape != arr.shape:
            raise CheckpointError(
                f"parameter {name} has shape {arrays[name].shape}, "
                f"model expects {arr.shape}"
            )
    params = from_named(template, arrays)
    return TrainResult(params=params, config=config, mask=mask, loss_log=[])
