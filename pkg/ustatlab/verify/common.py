"""Shared pieces of the check plugins: instances, samplers and report helpers."""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field, replace
from itertools import combinations, product
from typing import Any

import numpy as np

from ustatlab.core_models import CheckReport, KernelFamily, Space, TensorField
from ustatlab.spaces import make_space, uniform

LOWER_BOUND_TOL = 1e-12


@dataclass
class Instance:
    """A sampled check instance.

    ``params`` holds sizes, exponents and atom weights; ``data`` the random
    arrays that ``perturb`` is allowed to move.
    """

    params: dict[str, Any]
    data: dict[str, np.ndarray] = field(default_factory=dict)

    def with_data(self, **arrays: np.ndarray) -> Instance:
        return replace(self, data={**self.data, **arrays})

    def descriptor(self) -> dict[str, Any]:
        return {**self.params, "data": {k: v.tolist() for k, v in sorted(self.data.items())}}


def sample_weights(rng: np.random.Generator, r: int, mode: str = "uniform") -> list[float]:
    if mode == "uniform":
        return list(uniform(r).weights)
    raw = rng.uniform(0.2, 1.0, size=r)
    w = raw / raw.sum()
    w[-1] = 1.0 - math.fsum(w[:-1])
    return [float(x) for x in w]


def base_space(instance: Instance) -> Space:
    return make_space(instance.params["weights"], "probability")


def nonneg(rng: np.random.Generator, shape: Sequence[int], sparsity: float = 0.25) -> np.ndarray:
    """Uniform ``[0,1)`` values with roughly ``sparsity`` of them zeroed."""
    vals = rng.random(tuple(shape))
    return np.where(rng.random(tuple(shape)) < sparsity, 0.0, vals)


def jitter(
    rng: np.random.Generator,
    arr: np.ndarray,
    scale: float,
    lower: float | None = None,
    upper: float | None = None,
) -> np.ndarray:
    """Gaussian move of every entry by ``scale`` times the array's magnitude, then clipped."""
    size = max(1.0, float(np.abs(arr).max(initial=0.0)))
    out = arr + scale * size * rng.standard_normal(arr.shape)
    if lower is not None or upper is not None:
        out = np.clip(out, lower, upper)
    return out


def flip(rng: np.random.Generator, arr: np.ndarray, scale: float) -> np.ndarray:
    """Flip each entry of a 0/1 array with probability ``scale / 2``."""
    mask = rng.random(arr.shape) < 0.5 * min(scale, 1.0)
    return np.where(mask, 1.0 - arr, arr)


def mean_zero(arr: np.ndarray, w: np.ndarray, axes: Iterable[int]) -> np.ndarray:
    """Subtract weighted means along each of ``axes`` in turn."""
    out = arr
    for ax in axes:
        shape = [1] * out.ndim
        shape[ax] = w.size
        out = out - (out * w.reshape(shape)).sum(axis=ax, keepdims=True)
    return out


def index_tuples(n: int, m: int, strict: bool) -> list[tuple[int, ...]]:
    if strict:
        return list(combinations(range(1, n + 1), m))
    return list(product(range(1, n + 1), repeat=m))


def family_from_arrays(
    base: Space, n: int, m: int, arrays: np.ndarray, strict: bool, tail: Sequence[Space] = ()
) -> KernelFamily:
    """Kernels ``arrays[k]`` attached to the ``k``-th tuple of ``index_tuples(n, m, strict)``."""
    tuples = index_tuples(n, m, strict)
    kernels = {idx: TensorField((base,) * m + tuple(tail), arrays[k]) for k, idx in enumerate(tuples)}
    return KernelFamily(m=m, n=n, base=base, kernels=kernels, strict=strict)


def safe_ratio(num: float, den: float) -> float:
    if den == 0.0:
        return 1.0 if num == 0.0 else math.inf
    return num / den


def at_least(lhs: float, rhs: float, tol: float = LOWER_BOUND_TOL) -> bool:
    """``lhs >= rhs`` up to a relative tolerance."""
    return lhs >= rhs - tol * max(abs(lhs), abs(rhs))


def lower_bound_adverse(report: CheckReport) -> float:
    """``constant * rhs / lhs``; above 1 means the lower bound failed."""
    if report.error is not None or not math.isfinite(report.rhs):
        return -math.inf
    return report.constant * safe_ratio(report.rhs, report.lhs) if report.rhs > 0.0 else 0.0


def ratio_adverse(report: CheckReport) -> float:
    """The observed ratio itself, for measured constants."""
    if report.error is not None or not math.isfinite(report.ratio):
        return -math.inf
    return report.ratio
