"""Brute-force reference computations.

These are slow, exhaustive versions of quantities the main modules compute
by smarter means: K-functionals by grid search over decompositions, optimal
disjoint part assignments by enumeration, and Hoeffding projections by
inclusion-exclusion. Tests and the ``oracle`` subcommand use them to produce
reference values.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Iterable
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .core_models import Couple, NormSpec, Projector, TensorField
from .hoeffding import cond_expect, coordinates
from .interp import GOLDEN
from .norms import certificate_spec, evaluate, norm, validate_spec
from .utils.errors import BadSpecError, TooLargeError

MAX_GRID_ENTRIES = 4
GRID_BUDGET = 200_000
BUCKET_LIMIT = 2**20
BUCKET_CHUNK = 4096

logger = logging.getLogger(__name__)


@dataclass
class OracleResult:
    value: float
    argmin: np.ndarray
    evaluations: int


def _batched_norm(batch: np.ndarray, f: TensorField, spec: NormSpec) -> np.ndarray:
    """Norms of ``batch[k]`` (each shaped like ``f``) in one pass."""
    arr = np.moveaxis(batch, 0, -1)
    axes_w = [ax.w for ax in f.axes] + [np.ones(batch.shape[0])]
    return evaluate(arr, axes_w, spec).reshape(-1)


def _objective(batch: np.ndarray, f: TensorField, t: float, c: Couple) -> np.ndarray:
    return _batched_norm(batch, f, c.spec0) + t * _batched_norm(f.values[None, ...] - batch, f, c.spec1)


def _grid_points(budget: int, dims: int, points: int) -> int:
    per = max(3, min(points, int(budget ** (1.0 / dims))))
    return per if per % 2 else per - 1


def _zoom_search(
    objective: Callable[[np.ndarray], np.ndarray],
    basis: np.ndarray,
    center: np.ndarray,
    width: float,
    points: int,
    rounds: int,
) -> OracleResult:
    dims = center.size
    pts = _grid_points(GRID_BUDGET, dims, points)
    best_val, best = math.inf, center
    evals = 0
    for _ in range(rounds):
        lines = [np.linspace(c - width, c + width, pts) for c in center]
        mesh = np.stack(np.meshgrid(*lines, indexing="ij"), axis=-1).reshape(-1, dims)
        vals = objective(mesh @ basis.T)
        evals += len(mesh)
        k = int(np.argmin(vals))
        if vals[k] < best_val:
            best_val, best = float(vals[k]), mesh[k]
        center = best
        width = 2.0 * (2.0 * width / (pts - 1))
    return OracleResult(best_val, best @ basis.T, evals)


def grid_k(f: TensorField, t: float, c: Couple, points: int = 201, rounds: int = 6) -> OracleResult:
    """``K(f, t)`` by grid search over ``g`` entrywise in ``[-||f||_inf, ||f||_inf]``.

    The first grid has ``points`` values per entry (fewer when the product
    would exceed the evaluation budget); later rounds zoom in around the
    best point. The result is always an upper bound for ``K``.

    Raises:
        TooLargeError: more than ``MAX_GRID_ENTRIES`` entries.
    """
    if not t > 0.0:
        raise BadSpecError("t must be positive")
    validate_spec(c.spec0, f.ndim)
    validate_spec(c.spec1, f.ndim)
    if f.size > MAX_GRID_ENTRIES:
        raise TooLargeError(f.size, MAX_GRID_ENTRIES)
    top = float(np.abs(f.values).max(initial=0.0))
    if top == 0.0:
        return OracleResult(0.0, np.zeros(f.values.shape), 0)
    d = f.size

    def objective(flat: np.ndarray) -> np.ndarray:
        return _objective(flat.reshape((-1,) + f.values.shape), f, t, c)

    res = _zoom_search(objective, np.eye(d), np.zeros(d), top, points, rounds)
    logger.debug("grid K=%.10g after %d evaluations", res.value, res.evaluations)
    return OracleResult(res.value, res.argmin.reshape(f.values.shape), res.evaluations)


def constrained_grid_k(
    f: TensorField, t: float, c: Couple, projector: Projector, points: int = 201, rounds: int = 8
) -> OracleResult:
    """Grid search for ``K`` over ``g`` in ``range(projector)``.

    The search runs over coefficients in an orthonormal basis of the range,
    each coefficient in ``[-2||f||_2, 2||f||_2]``.
    """
    d = f.size
    if d > 2**10:
        raise TooLargeError(d, 2**10)
    cols = np.stack([projector(np.eye(d)[k].reshape(f.values.shape)).ravel() for k in range(d)], axis=1)
    u, s, _ = np.linalg.svd(cols)
    basis = u[:, s > 1e-10 * max(1.0, float(s.max(initial=0.0)))]
    dims = basis.shape[1]
    if dims > MAX_GRID_ENTRIES:
        raise TooLargeError(dims, MAX_GRID_ENTRIES)
    radius = 2.0 * float(np.linalg.norm(f.values))
    if radius == 0.0 or dims == 0:
        return OracleResult(t * norm(f, c.spec1), np.zeros(f.values.shape), 1)

    def objective(flat: np.ndarray) -> np.ndarray:
        return _objective(flat.reshape((-1,) + f.values.shape), f, t, c)

    res = _zoom_search(objective, basis, np.zeros(dims), radius, points, rounds)
    return OracleResult(res.value, res.argmin.reshape(f.values.shape), res.evaluations)


def _shrink(values: np.ndarray, lam: float) -> np.ndarray:
    return np.sign(values) * np.maximum(np.abs(values) - lam, 0.0)


def truncation_k(f: TensorField, t: float, c: Couple, samples: int = 4097) -> OracleResult:
    """``K`` over truncations ``g = sign(f)(|f| - lam)_+``.

    Exact when ``X_0`` is a single ``L^1`` node and ``X_1`` a single ``L^p``
    node over all axes: the optimal ``f - g`` then has constant modulus on
    the support of ``g``.
    """
    for spec in (c.spec0, c.spec1):
        if spec.inner is not None:
            raise BadSpecError("truncation oracle needs scalar couples")
    top = float(np.abs(f.values).max(initial=0.0))
    if top == 0.0:
        return OracleResult(0.0, np.zeros(f.values.shape), 0)

    def value(lam: float) -> float:
        g = _shrink(f.values, lam)
        return norm(f.with_values(g), c.spec0) + t * norm(f.with_values(f.values - g), c.spec1)

    lams = np.linspace(0.0, top, samples)
    vals = [value(float(lam)) for lam in lams]
    k = int(np.argmin(vals))
    lo, hi = float(lams[max(k - 1, 0)]), float(lams[min(k + 1, samples - 1)])
    a, b = hi - GOLDEN * (hi - lo), lo + GOLDEN * (hi - lo)
    va, vb = value(a), value(b)
    for _ in range(100):
        if va <= vb:
            hi, b, vb = b, a, va
            a = hi - GOLDEN * (hi - lo)
            va = value(a)
        else:
            lo, a, va = a, b, vb
            b = lo + GOLDEN * (hi - lo)
            vb = value(b)
    best_lam, best = min([(float(lams[k]), vals[k]), (a, va), (b, vb)], key=lambda item: item[1])
    return OracleResult(best, _shrink(f.values, best_lam), samples + 202)


def bucket_optimum(target: TensorField, p: float, max_assignments: int = BUCKET_LIMIT) -> OracleResult:
    """Best disjoint assignment of the atoms of ``target`` to the ``2^m`` slot subsets.

    Part ``J`` is measured in ``L^1(slots outside J, L^p(slots in J))``;
    zero atoms are left out. ``argmin`` holds, per atom, the index of the
    chosen subset in ``combinations`` order by size.

    Raises:
        TooLargeError: more than ``max_assignments`` assignments.
    """
    m = target.ndim
    subsets = [s for size in range(m + 1) for s in combinations(range(1, m + 1), size)]
    specs = [certificate_spec(m, s, p) for s in subsets]
    flat = target.values.ravel()
    support = np.flatnonzero(flat)
    total = len(subsets) ** len(support)
    if total > max_assignments:
        raise TooLargeError(total, max_assignments)
    if support.size == 0:
        return OracleResult(0.0, np.zeros(flat.shape, dtype=int), 0)
    codes = np.arange(total)
    best_val, best_code = math.inf, 0
    for start in range(0, total, BUCKET_CHUNK):
        chunk = codes[start : start + BUCKET_CHUNK]
        digits = (chunk[:, None] // len(subsets) ** np.arange(support.size)) % len(subsets)
        acc = np.zeros(chunk.size)
        for j, spec in enumerate(specs):
            parts = np.zeros((chunk.size, flat.size))
            parts[:, support] = np.where(digits == j, flat[support], 0.0)
            acc += _batched_norm(parts.reshape((chunk.size,) + target.values.shape), target, spec)
        k = int(np.argmin(acc))
        if acc[k] < best_val:
            best_val, best_code = float(acc[k]), int(chunk[k])
    choice = np.zeros(flat.shape, dtype=int)
    choice[support] = (best_code // len(subsets) ** np.arange(support.size)) % len(subsets)
    return OracleResult(best_val, choice.reshape(target.values.shape), total)


def inclusion_exclusion_project(f: TensorField, a: Iterable[int]) -> TensorField:
    """``P_A f = sum_{B subset A} (-1)^{|A - B|} E_B f``."""
    _, n = coordinates(f)
    a = tuple(sorted(set(int(j) for j in a)))
    total = np.zeros_like(f.values)
    for size in range(len(a) + 1):
        for b in combinations(a, size):
            total = total + (-1.0) ** (len(a) - size) * cond_expect(f, b).values
    return f.with_values(total)

