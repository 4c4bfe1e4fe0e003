"""Versioned binary checkpoint container.

Layout (all integers little-endian, floats little-endian IEEE-754 doubles):

    magic   8 bytes  b"MMCKPT01"
    step    u64
    config  u32 length + UTF-8 JSON (sorted keys, compact separators)
    params  tensor block
    opt     u8 flag; when 1: beta1/beta2/eps as f64, then two tensor
            blocks (first and second moments, same names as params)

A tensor block is: u32 count, then per entry u16 name length + name bytes,
u8 ndim, u32 per extent, raw C-order float64 data. No timestamps are
stored anywhere, so identical training runs produce identical files.
"""
from __future__ import annotations

import json
import struct

import numpy as np

from .optim import AdamState
from .params import ParamStore

MAGIC = b"MMCKPT01"


class CheckpointError(ValueError):
    pass


def _pack_block(arrays: dict[str, np.ndarray]) -> bytes:
    parts = [struct.pack("<I", len(arrays))]
    for name, arr in arrays.items():
        raw = name.encode("utf-8")
        arr = np.ascontiguousarray(arr, dtype="<f8")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())
    return b"".join(parts)


def _unpack_block(data: bytes, pos: int) -> tuple[dict[str, np.ndarray], int]:
    (count,) = struct.unpack_from("<I", data, pos)
    pos += 4
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", data, pos)
        pos += 2
        name = data[pos : pos + name_len].decode("utf-8")
        pos += name_len
        (ndim,) = struct.unpack_from("<B", data, pos)
        pos += 1
        shape = struct.unpack_from(f"<{ndim}I", data, pos)
        pos += 4 * ndim
        n = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(data, dtype="<f8", count=n, offset=pos).reshape(shape)
        pos += 8 * n
        out[name] = arr.astype(np.float64)
    return out, pos


def save_checkpoint(
    path,
    params: ParamStore,
    step: int = 0,
    config: dict | None = None,
    opt: AdamState | None = None,
) -> None:
    blob = json.dumps(config or {}, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [MAGIC, struct.pack("<Q", step), struct.pack("<I", len(blob)), blob]
    parts.append(_pack_block(params.state_dict()))
    if opt is None:
        parts.append(struct.pack("<B", 0))
    else:
        parts.append(struct.pack("<B", 1))
        parts.append(struct.pack("<3d", opt.beta1, opt.beta2, opt.eps))
        parts.append(_pack_block(opt.m))
        parts.append(_pack_block(opt.v))
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def load_checkpoint(path) -> tuple[ParamStore, int, dict, AdamState | None]:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != MAGIC:
        raise CheckpointError(f"bad checkpoint magic {data[:8]!r}")
    (step,) = struct.unpack_from("<Q", data, 8)
    (config_len,) = struct.unpack_from("<I", data, 16)
    pos = 20
    config = json.loads(data[pos : pos + config_len].decode("utf-8"))
    pos += config_len
    arrays, pos = _unpack_block(data, pos)
    params = ParamStore()
    for name, arr in arrays.items():
        params.add(name, arr)
    (flag,) = struct.unpack_from("<B", data, pos)
    pos += 1
    opt = None
    if flag:
        beta1, beta2, eps = struct.unpack_from("<3d", data, pos)
        pos += 24
        m, pos = _unpack_block(data, pos)
        v, pos = _unpack_block(data, pos)
        opt = AdamState(beta1=beta1, beta2=beta2, eps=eps, m=m, v=v)
    return params, step, config, opt
