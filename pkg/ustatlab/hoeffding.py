"""Conditional expectations, Hoeffding projections and U-statistic assembly.

A field on ``Omega^n`` has ``n`` leading coordinate axes over one probability
space and optional trailing ``hilbert_value`` axes. Subsets ``A`` of
coordinates are 1-based. ``P_A`` is computed axis by axis from the tensor
formula ``(id - E)^{(x)A} (x) E^{(x)[1,n] minus A}``.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable
from itertools import combinations

import numpy as np

from .core_models import KernelFamily, ProjectionIndex, Projector, Space, TensorField
from .spaces import MAX_ELEMENTS, check_guard
from .utils.errors import BadAxisError, BadLevelError, NotProbabilityError, TooLargeError

MAX_DECOMPOSE_COORDINATES = 16

logger = logging.getLogger(__name__)


def coordinates(f: TensorField) -> tuple[Space, int]:
    """Return the base space and ``n`` of a field on ``Omega^n``."""
    coords = f.coordinate_axes
    if coords != tuple(range(len(coords))):
        raise BadAxisError("value axes must trail the coordinate axes")
    if not coords:
        raise BadAxisError("field has no coordinate axes")
    base = f.axes[0]
    if any(f.axes[k] != base for k in coords):
        raise BadAxisError("coordinate axes must share one space")
    if base.kind != "probability":
        raise NotProbabilityError("Hoeffding operations need a probability space")
    return base, len(coords)


def _subset(a: Iterable[int], n: int) -> ProjectionIndex:
    out = frozenset(int(j) for j in a)
    if any(not 1 <= j <= n for j in out):
        raise BadAxisError(f"subset {sorted(out)} not contained in [1,{n}]")
    return out


def _mean_along(arr: np.ndarray, w: np.ndarray, axis: int) -> np.ndarray:
    shape = [1] * arr.ndim
    shape[axis] = w.size
    return np.broadcast_to((arr * w.reshape(shape)).sum(axis=axis, keepdims=True), arr.shape)


def _project_array(arr: np.ndarray, w: np.ndarray, n: int, a: ProjectionIndex) -> np.ndarray:
    out = arr
    for j in range(n):
        mean = _mean_along(out, w, j)
        out = out - mean if (j + 1) in a else np.array(mean)
    return out


def _expect_array(arr: np.ndarray, w: np.ndarray, n: int, a: ProjectionIndex) -> np.ndarray:
    out = arr
    for j in range(n):
        if (j + 1) not in a:
            out = np.array(_mean_along(out, w, j))
    return out


def cond_expect(f: TensorField, a: Iterable[int]) -> TensorField:
    """``E_A f``: integrate away the coordinates outside ``A``."""
    base, n = coordinates(f)
    return f.with_values(_expect_array(f.values, base.w, n, _subset(a, n)))


def hoeffding_project(f: TensorField, a: Iterable[int]) -> TensorField:
    """``P_A f`` by the tensor-factor formula."""
    base, n = coordinates(f)
    return f.with_values(_project_array(f.values, base.w, n, _subset(a, n)))


def hoeffding_level(f: TensorField, m: int) -> TensorField:
    """``P_m f``, the sum of ``P_B f`` over ``|B| = m``."""
    base, n = coordinates(f)
    if not 0 <= m <= n:
        raise BadLevelError(f"level {m} outside [0,{n}]")
    total = np.zeros_like(f.values)
    for b in combinations(range(1, n + 1), m):
        total += _project_array(f.values, base.w, n, frozenset(b))
    return f.with_values(total)


def hoeffding_decompose(f: TensorField) -> dict[ProjectionIndex, TensorField]:
    """All ``2^n`` components ``P_B f`` keyed by ``B``, in order of ``(|B|, B)``."""
    base, n = coordinates(f)
    if n > MAX_DECOMPOSE_COORDINATES:
        raise TooLargeError(2**n, 2**MAX_DECOMPOSE_COORDINATES)
    out: dict[ProjectionIndex, TensorField] = {}
    for size in range(n + 1):
        for b in combinations(range(1, n + 1), size):
            out[frozenset(b)] = f.with_values(_project_array(f.values, base.w, n, frozenset(b)))
    return out


def level_projector(f: TensorField, max_level: int) -> Projector:
    """Projector onto ``V_{<=max_level}`` for arrays laid out like ``f``."""
    base, n = coordinates(f)
    if not 0 <= max_level <= n:
        raise BadLevelError(f"level {max_level} outside [0,{n}]")
    subsets = [frozenset(b) for size in range(max_level + 1) for b in combinations(range(1, n + 1), size)]
    w = base.w

    def project(values: np.ndarray) -> np.ndarray:
        if max_level == n:
            return np.array(values, dtype=float)
        return sum((_project_array(values, w, n, b) for b in subsets), np.zeros(values.shape))

    return project


def support_projector(mask: np.ndarray) -> Projector:
    """Projector restricting to the support ``mask`` (multiplication by an indicator)."""
    keep = np.asarray(mask, dtype=bool)

    def project(values: np.ndarray) -> np.ndarray:
        return np.where(keep, values, 0.0)

    return project


def extract_kernels(f: TensorField, m: int) -> KernelFamily:
    """Kernels ``f_i`` with ``P_i f(x) = f_i(x_{i_1}, ..., x_{i_m})`` for increasing ``i``."""
    base, n = coordinates(f)
    if not 0 <= m <= n:
        raise BadLevelError(f"level {m} outside [0,{n}]")
    if n > MAX_DECOMPOSE_COORDINATES:
        raise TooLargeError(2**n, 2**MAX_DECOMPOSE_COORDINATES)
    value_axes = f.axes[n:]
    kernels: dict[tuple[int, ...], TensorField] = {}
    for idx in combinations(range(1, n + 1), m):
        comp = _project_array(f.values, base.w, n, frozenset(idx))
        sel = tuple(slice(None) if (j + 1) in idx else 0 for j in range(n))
        kernels[idx] = TensorField((base,) * m + value_axes, comp[sel])
    return KernelFamily(m=m, n=n, base=base, kernels=kernels, strict=True)


def kernel_on_axes(kern: np.ndarray, positions: tuple[int, ...], total: int) -> np.ndarray:
    """Broadcast an ``m``-variable kernel so variable ``s`` sits on axis ``positions[s]``."""
    m = len(positions)
    order = np.argsort(positions)
    moved = np.transpose(kern, tuple(order) + tuple(range(m, kern.ndim)))
    shape = [1] * total + list(kern.shape[m:])
    for s in order:
        shape[positions[s]] = kern.shape[s]
    return moved.reshape(shape)


def assemble_ustat(k: KernelFamily, decoupled: bool = False, max_elements: int = MAX_ELEMENTS) -> TensorField:
    """Pointwise sum of kernel evaluations.

    Coupled: ``sum_i f_i(x_{i_1}, ..., x_{i_m})`` on ``Omega^n``.
    Decoupled: ``sum_i f_i(x^(1)_{i_1}, ..., x^(m)_{i_m})`` on ``(Omega^n)^m``,
    slot ``s`` coordinate ``i_s`` living on axis ``s * n + i_s - 1``.
    """
    n, m, r = k.n, k.m, k.base.size
    total = n * m if decoupled else n
    value_dim = k.value_dim
    value_axes = () if value_dim is None else (next(kn.axes[-1] for kn in k.kernels.values() if kn.ndim > m),)
    check_guard(r**total * (value_dim or 1), max_elements)
    shape = (r,) * total + tuple(ax.size for ax in value_axes)
    out = np.zeros(shape)
    for idx, kern in k.kernels.items():
        if decoupled:
            positions = tuple(s * n + i - 1 for s, i in enumerate(idx))
        else:
            if len(set(idx)) != len(idx):
                raise BadAxisError(f"coupled assembly needs distinct indices, got {idx}")
            positions = tuple(i - 1 for i in idx)
        arr = kern.values
        if value_dim is not None and kern.ndim == m:
            arr = arr[..., None] * np.ones(value_dim)
        out = out + kernel_on_axes(arr, positions, total)
    logger.debug("assembled %d kernels onto %d axes", len(k.kernels), total)
    return TensorField((k.base,) * total + value_axes, out)


def inner_product(f: TensorField, g: TensorField) -> float:
    """``<f, g>`` under the product measure, value axes paired euclidean."""
    w = np.ones(())
    for ax in f.axes:
        w = np.multiply.outer(w, ax.w)
    return math.fsum((f.values * g.values * w).ravel())
