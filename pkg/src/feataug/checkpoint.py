"""Versioned binary checkpoints for a trained autoencoder.

Layout (all integers and floats little-endian)::

    magic          8 bytes  b"FAUGCKPT"
    version        u32
    n_features     u32
    hidden         u32
    dropout        f64
    context_drop   u8
    reverse        u8
    fingerprint    u32 length + UTF-8 bytes
    n_tensors      u32
    per tensor:    u16 name length + UTF-8 name, u8 ndim, ndim x u64 dims,
                   u64 element count, count x f64

Tensors are the model parameters in ``AutoencoderModel.params()`` order,
optionally followed by ``norm.mean`` and ``norm.std``.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autoencoder import AutoencoderModel
from .datasets import GlobalNorm

MAGIC = b"FAUGCKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    model: AutoencoderModel
    norm: GlobalNorm | None = None
    fingerprint: str = ""
    reverse: bool = True
    version: int = VERSION


def _write_tensor(buf, name: str, arr: np.ndarray):
    a = np.ascontiguousarray(arr, dtype="<f8")
    nb = name.encode("utf-8")
    buf.write(struct.pack("<H", len(nb)))
    buf.write(nb)
    buf.write(struct.pack("<B", a.ndim))
    buf.write(struct.pack(f"<{a.ndim}Q", *a.shape))
    buf.write(struct.pack("<Q", a.size))
    buf.write(a.tobytes())


def to_bytes(ckpt: Checkpoint) -> bytes:
    m = ckpt.model
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<IIIdBB", ckpt.version, m.n_features, m.hidden, m.dropout,
                          int(m.context_dropout), int(ckpt.reverse)))
    fp = ckpt.fingerprint.encode("utf-8")
    buf.write(struct.pack("<I", len(fp)))
    buf.write(fp)
    tensors = list(m.params().items())
    if ckpt.norm is not None:
        tensors += [("norm.mean", ckpt.norm.mean), ("norm.std", ckpt.norm.std)]
    buf.write(struct.pack("<I", len(tensors)))
    for name, arr in tensors:
        _write_tensor(buf, name, arr)
    return buf.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.data):
            raise CheckpointError("truncated checkpoint")
        out = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += size
        return out

    def raw(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError("truncated checkpoint")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out


def from_bytes(data: bytes) -> Checkpoint:
    r = _Reader(data)
    if r.raw(8) != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    version, F, H, dropout, ctx_drop, reverse = r.take("<IIIdBB")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (fp_len,) = r.take("<I")
    fingerprint = r.raw(fp_len).decode("utf-8")
    (n,) = r.take("<I")
    tensors = {}
    for _ in range(n):
        (name_len,) = r.take("<H")
        name = r.raw(name_len).decode("utf-8")
        (ndim,) = r.take("<B")
        shape = r.take(f"<{ndim}Q") if ndim else ()
        (count,) = r.take("<Q")
        if int(np.prod(shape)) != count:
            raise CheckpointError(f"tensor {name}: shape {shape} does not hold {count} values")
        arr = np.frombuffer(r.raw(8 * count), dtype="<f8").astype(np.float64).reshape(shape)
        tensors[name] = arr
    if r.pos != len(data):
        raise CheckpointError("trailing bytes after checkpoint")
    model = AutoencoderModel.zeros(F, H, dropout=dropout, context_dropout=bool(ctx_drop))
    for name, p in model.params().items():
        if name not in tensors:
            raise CheckpointError(f"missing tensor {name}")
        if tensors[name].shape != p.shape:
            raise CheckpointError(f"tensor {name} has shape {tensors[name].shape}, expected {p.shape}")
        p[...] = tensors[name]
    norm = None
    if "norm.mean" in tensors:
        norm = GlobalNorm(tensors["norm.mean"].copy(), tensors["norm.std"].copy())
    return Checkpoint(model, norm, fingerprint, bool(reverse), version)


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    Path(path).write_bytes(to_bytes(ckpt))


def load_checkpoint(path) -> Checkpoint:
    return from_bytes(Path(path).read_bytes())
