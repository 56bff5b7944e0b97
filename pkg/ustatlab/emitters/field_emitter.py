"""Flat numeric field files.

Layout of the 1-D float64 array: ``ndim``, then per axis ``size``, ``kind``
code and ``blocks``, then the block offsets and weights of every axis, then
the values in row-major order.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ustatlab.core_models import Space, SpaceKind, TensorField
from ustatlab.utils.errors import BadAxisError

KIND_CODES: dict[SpaceKind, int] = {"probability": 0, "sigma_finite": 1, "hilbert_value": 2}
CODE_KINDS: dict[int, SpaceKind] = {v: k for k, v in KIND_CODES.items()}


def encode(f: TensorField) -> np.ndarray:
    header: list[float] = [float(f.ndim)]
    for ax in f.axes:
        header.extend([float(ax.size), float(KIND_CODES[ax.kind]), float(ax.blocks)])
    for ax in f.axes:
        header.extend(float(o) for o in ax.block_offsets)
        header.extend(ax.weights)
    return np.concatenate([np.asarray(header), f.values.ravel()])


def decode(flat: np.ndarray) -> TensorField:
    flat = np.asarray(flat, dtype=float)
    ndim = int(flat[0])
    pos = 1
    meta = []
    for _ in range(ndim):
        size, code, blocks = (int(v) for v in flat[pos : pos + 3])
        meta.append((size, CODE_KINDS[code], blocks))
        pos += 3
    axes = []
    for size, kind, blocks in meta:
        offsets = tuple(int(v) for v in flat[pos : pos + blocks])
        pos += blocks
        weights = tuple(float(v) for v in flat[pos : pos + size])
        pos += size
        axes.append(Space(weights=weights, kind=kind, block_offsets=offsets))
    shape = tuple(size for size, _, _ in meta)
    values = flat[pos:]
    if values.size != int(np.prod(shape)):
        raise BadAxisError(f"field file holds {values.size} values, header expects {int(np.prod(shape))}")
    return TensorField(tuple(axes), values.reshape(shape))


def emit(f: TensorField, path: Path) -> Path:
    p = Path(path)
    np.save(p, encode(f), allow_pickle=False)
    return p if p.suffix == ".npy" else p.with_name(p.name + ".npy")


def load(path: Path) -> TensorField:
    return decode(np.load(Path(path), allow_pickle=False))
