"""Binary checkpoint container.

Layout (little-endian)::

    magic      8 bytes  b"HISRESCK"
    version    u32
    meta_len   u32, followed by meta_len bytes of UTF-8 JSON
               (config, epoch, optimizer scalars, RNG state, loss log)
    count      u32 tensor records, each:
        name_len u32, name (UTF-8)
        rank     u32, extents rank x u64
        data     prod(extents) x float64
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO

import numpy as np

from hisres.config import RunConfig
from hisres.errors import CheckpointError
from hisres.numerics.optim import OptimizerState

MAGIC = b"HISRESCK"
VERSION = 1


@dataclass
class Checkpoint:
    config: RunConfig
    params: dict[str, np.ndarray]
    optimizer: OptimizerState
    epoch: int
    rng_state: dict
    num_entities: int
    num_relations: int
    losses: list = field(default_factory=list)


def _write_tensor(fh: BinaryIO, name: str, arr: np.ndarray) -> None:
    raw = name.encode("utf-8")
    arr = np.ascontiguousarray(arr, dtype="<f8")
    fh.write(struct.pack("<I", len(raw)))
    fh.write(raw)
    fh.write(struct.pack("<I", arr.ndim))
    fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
    fh.write(arr.tobytes())


def _read_exact(fh: BinaryIO, n: int) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise CheckpointError("truncated checkpoint")
    return buf


def _read_tensor(fh: BinaryIO) -> tuple[str, np.ndarray]:
    (name_len,) = struct.unpack("<I", _read_exact(fh, 4))
    name = _read_exact(fh, name_len).decode("utf-8")
    (rank,) = struct.unpack("<I", _read_exact(fh, 4))
    shape = struct.unpack(f"<{rank}Q", _read_exact(fh, 8 * rank))
    count = int(np.prod(shape)) if rank else 1
    data = np.frombuffer(_read_exact(fh, 8 * count), dtype="<f8").astype(np.float64).reshape(shape)
    return name, data


def save_checkpoint(ckpt: Checkpoint, path) -> Path:
    path = Path(path)
    opt = ckpt.optimizer
    meta = {
        "config": ckpt.config.to_dict(),
        "epoch": ckpt.epoch,
        "num_entities": ckpt.num_entities,
        "num_relations": ckpt.num_relations,
        "optimizer": {"lr": opt.lr, "beta1": opt.beta1, "beta2": opt.beta2, "eps": opt.eps, "step": opt.step},
        "rng_state": ckpt.rng_state,
        "losses": ckpt.losses,
    }
    records = [(f"param/{k}", v) for k, v in ckpt.params.items()]
    records += [(f"adam.m/{k}", v) for k, v in opt.m.items()]
    records += [(f"adam.v/{k}", v) for k, v in opt.v.items()]
    raw = json.dumps(meta).encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(raw)))
        fh.write(raw)
        fh.write(struct.pack("<I", len(records)))
        for name, arr in records:
            _write_tensor(fh, name, arr)
    return path


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    try:
        fh = path.open("rb")
    except OSError as exc:
        raise CheckpointError(f"cannot open checkpoint {path}: {exc}") from exc
    with fh:
        if _read_exact(fh, 8) != MAGIC:
            raise CheckpointError(f"{path} is not a checkpoint")
        version, meta_len = struct.unpack("<II", _read_exact(fh, 8))
        if version != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        try:
            meta = json.loads(_read_exact(fh, meta_len).decode("utf-8"))
        except ValueError as exc:
            raise CheckpointError("corrupt checkpoint header") from exc
        (count,) = struct.unpack("<I", _read_exact(fh, 4))
        params, m, v = {}, {}, {}
        for _ in range(count):
            name, arr = _read_tensor(fh)
            kind, _, key = name.partition("/")
            {"param": params, "adam.m": m, "adam.v": v}.get(kind, {})[key] = arr
    o = meta["optimizer"]
    opt = OptimizerState(lr=o["lr"], beta1=o["beta1"], beta2=o["beta2"], eps=o["eps"], step=o["step"], m=m, v=v)
    return Checkpoint(RunConfig.from_dict(meta["config"]), params, opt, meta["epoch"], meta["rng_state"],
                      meta["num_entities"], meta["num_relations"], meta.get("losses", []))
