"""Mixed norms and the U-statistic functionals built from them.

``NormSpec`` trees are evaluated innermost first, every node integrating its
axes against their weights (counting measure on value and index axes). Norm
exponents may be any positive real; ``inf`` nodes take the maximum and are
only used for dual norms.
"""

from __future__ import annotations

import logging
import math
import re
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .core_models import Couple, KernelFamily, NormSpec, TensorField
from .hoeffding import coordinates, extract_kernels, hoeffding_decompose, kernel_on_axes
from .spaces import MAX_ELEMENTS, check_guard
from .utils.errors import BadSpecError, HigherLevelsPresentError, NotNonnegativeError
from .utils.seeding import block_rng

Mode = Literal["coupled", "decoupled"]
Method = Literal["exact", "mc"]

MC_BLOCK = 4096
HIGHER_LEVEL_TOL = 1e-10

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LhsEstimate:
    """Value of a U-statistic functional; ``stderr`` is 0 for exact evaluation."""

    value: float
    stderr: float = 0.0
    samples: int = 0


def lp(p: float, axes: Sequence[int]) -> NormSpec:
    return NormSpec(float(p), tuple(axes))


def mixed(outer_p: float, outer_axes: Sequence[int], inner_p: float, inner_axes: Sequence[int]) -> NormSpec:
    """``L^{outer_p}(outer_axes, L^{inner_p}(inner_axes))``; empty groups collapse."""
    if not inner_axes:
        return lp(outer_p, outer_axes)
    if not outer_axes:
        return lp(inner_p, inner_axes)
    return NormSpec(float(outer_p), tuple(outer_axes), lp(inner_p, inner_axes))


def validate_spec(spec: NormSpec, ndim: int) -> None:
    seen = spec.all_axes()
    if sorted(seen) != list(range(ndim)):
        raise BadSpecError(f"spec {spec.describe()} must cover axes 0..{ndim - 1} exactly once")
    for node in spec.nodes():
        if not node.exponent > 0.0:
            raise BadSpecError("norm exponents must be positive")


def dual_spec(spec: NormSpec) -> NormSpec:
    """Same tree with conjugate exponents (1 and inf swap)."""

    def conj(p: float) -> float:
        if p < 1.0:
            raise BadSpecError("no dual norm for exponents below 1")
        if p == 1.0:
            return math.inf
        return 1.0 if math.isinf(p) else p / (p - 1.0)

    inner = None if spec.inner is None else dual_spec(spec.inner)
    return NormSpec(conj(spec.exponent), spec.axes, inner)


def _weights_on(axes_w: Sequence[np.ndarray], axes: Sequence[int], ndim: int) -> np.ndarray:
    out = np.ones([1] * ndim)
    for ax in axes:
        shape = [1] * ndim
        shape[ax] = axes_w[ax].size
        out = out * axes_w[ax].reshape(shape)
    return out


def evaluate(values: np.ndarray, axes_w: Sequence[np.ndarray], spec: NormSpec) -> np.ndarray:
    """Reduce the spec's axes of ``values``; remaining axes act as a batch.

    Returns an array with the reduced axes kept as length-1 dimensions.
    """
    cur = np.abs(values)
    ndim = values.ndim
    for node in spec.nodes():
        if math.isinf(node.exponent):
            cur = cur.max(axis=node.axes, keepdims=True)
            continue
        w = _weights_on(axes_w, node.axes, ndim)
        p = node.exponent
        cur = (w * cur**p).sum(axis=node.axes, keepdims=True) ** (1.0 / p)
    return cur


def norm(f: TensorField, spec: NormSpec) -> float:
    """Exact weighted mixed norm of ``f``.

    Raises:
        BadSpecError: the spec does not cover the field's axes.
    """
    validate_spec(spec, f.ndim)
    if f.ndim == 0:
        return abs(float(f.values))
    return float(evaluate(f.values, [ax.w for ax in f.axes], spec).ravel()[0])


def smoothed_norm(
    values: np.ndarray, axes_w: Sequence[np.ndarray], spec: NormSpec, eps: float
) -> tuple[float, np.ndarray]:
    """Norm with leaves ``sqrt(x^2 + eps^2)`` and its gradient in ``values``."""
    ndim = values.ndim
    leaf = np.sqrt(values * values + eps * eps)
    chain = [leaf]
    for node in spec.nodes():
        w = _weights_on(axes_w, node.axes, ndim)
        p = node.exponent
        chain.append((w * chain[-1] ** p).sum(axis=node.axes, keepdims=True) ** (1.0 / p))
    grad = np.ones_like(chain[-1])
    for node, child, parent in zip(reversed(spec.nodes()), reversed(chain[:-1]), reversed(chain[1:]), strict=True):
        w = _weights_on(axes_w, node.axes, ndim)
        p = node.exponent
        grad = grad * w * (child / parent) ** (p - 1.0)
    grad = grad * values / leaf
    return float(chain[-1].ravel()[0]), grad


def _powered_kernels(k: KernelFamily, inner: float, check_sign: bool) -> dict[tuple[int, ...], np.ndarray]:
    out: dict[tuple[int, ...], np.ndarray] = {}
    for idx, kern in k.kernels.items():
        arr = kern.values
        if check_sign and np.any(arr < 0.0):
            raise NotNonnegativeError(f"kernel {idx} takes negative values")
        powered = np.abs(arr) ** inner
        if kern.ndim > k.m:
            powered = powered.sum(axis=-1)
        out[idx] = powered
    return out


def _slot_positions(idx: tuple[int, ...], n: int, mode: Mode) -> tuple[int, ...]:
    if mode == "decoupled":
        return tuple(s * n + i - 1 for s, i in enumerate(idx))
    if len(set(idx)) != len(idx):
        raise BadSpecError(f"coupled functionals need distinct indices, got {idx}")
    return tuple(i - 1 for i in idx)


def _exact_sum(
    k: KernelFamily, powered: dict[tuple[int, ...], np.ndarray], mode: Mode, max_elements: int
) -> tuple[np.ndarray, np.ndarray]:
    total = k.n * k.m if mode == "decoupled" else k.n
    r = k.base.size
    check_guard(r**total, max_elements)
    acc = np.zeros((r,) * total)
    for idx, arr in powered.items():
        acc = acc + kernel_on_axes(arr, _slot_positions(idx, k.n, mode), total)
    weight = np.ones(())
    for _ in range(total):
        weight = np.multiply.outer(weight, k.base.w)
    return acc, weight


def _mc_block(
    k: KernelFamily,
    powered: dict[tuple[int, ...], np.ndarray],
    mode: Mode,
    power: float,
    seed: int,
    block: int,
    size: int,
) -> tuple[float, float, int]:
    rng = block_rng(seed, block)
    total = k.n * k.m if mode == "decoupled" else k.n
    draws = rng.choice(k.base.size, size=(size, total), p=k.base.w)
    acc = np.zeros(size)
    for idx, arr in powered.items():
        cols = _slot_positions(idx, k.n, mode)
        acc += arr[tuple(draws[:, c] for c in cols)] if cols else float(arr)
    vals = acc**power
    return math.fsum(vals), math.fsum(vals * vals), size


def ustat_moment(
    k: KernelFamily,
    inner: float,
    outer: float,
    mode: Mode = "decoupled",
    method: Method = "exact",
    samples: int = 100_000,
    seed: int = 0,
    threads: int = 1,
    check_sign: bool = False,
    max_elements: int = MAX_ELEMENTS,
) -> LhsEstimate:
    """``E (sum_i |f_i(...)|^inner)^(outer/inner)`` in coupled or decoupled form.

    Value axes are summed inside the inner power. ``mc`` draws ``samples``
    product-measure points in blocks of ``MC_BLOCK``; block ``b`` uses the
    stream derived from ``(seed, b)`` so the estimate does not depend on the
    thread count.
    """
    if not inner > 0.0 or not outer > 0.0:
        raise BadSpecError("exponents must be positive")
    powered = _powered_kernels(k, inner, check_sign)
    power = outer / inner
    if not powered:
        return LhsEstimate(0.0)
    if method == "exact":
        acc, weight = _exact_sum(k, powered, mode, max_elements)
        return LhsEstimate(math.fsum((weight * acc**power).ravel()))
    blocks = [(b, min(MC_BLOCK, samples - b * MC_BLOCK)) for b in range(math.ceil(samples / MC_BLOCK))]

    def run(item: tuple[int, int]) -> tuple[float, float, int]:
        return _mc_block(k, powered, mode, power, seed, item[0], item[1])

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, blocks))
    else:
        parts = [run(b) for b in blocks]
    total = math.fsum(p[0] for p in parts)
    total_sq = math.fsum(p[1] for p in parts)
    count = sum(p[2] for p in parts)
    mean = total / count
    var = max(total_sq / count - mean * mean, 0.0) * count / max(count - 1, 1)
    logger.debug("mc estimate %.6g from %d samples in %d blocks", mean, count, len(blocks))
    return LhsEstimate(mean, math.sqrt(var / count), count)


def ustat_lhs(
    k: KernelFamily,
    p: float,
    mode: Mode = "decoupled",
    method: Method = "exact",
    samples: int = 100_000,
    seed: int = 0,
    threads: int = 1,
    max_elements: int = MAX_ELEMENTS,
) -> LhsEstimate:
    """``E (sum_i f_i(...)^p)^(1/p)`` for a nonnegative kernel family.

    Raises:
        NotNonnegativeError: a kernel takes a negative value.
        TooLargeError: exact enumeration exceeds the guard.
    """
    return ustat_moment(
        k,
        p,
        1.0,
        mode=mode,
        method=method,
        samples=samples,
        seed=seed,
        threads=threads,
        check_sign=True,
        max_elements=max_elements,
    )


def square_function(f: TensorField, max_level: int) -> TensorField:
    """Pointwise ``sqrt(sum_{|A| <= M} |P_A f|^2)`` on the coordinate axes.

    Raises:
        HigherLevelsPresentError: some ``P_A f`` with ``|A| > M`` does not vanish.
    """
    base, n = coordinates(f)
    comps = hoeffding_decompose(f)
    scale = max(1.0, float(np.abs(f.values).max(initial=0.0)))
    value_axes = tuple(range(n, f.ndim))
    total = np.zeros((base.size,) * n)
    for a, comp in comps.items():
        if len(a) > max_level:
            if np.abs(comp.values).max(initial=0.0) > HIGHER_LEVEL_TOL * scale:
                raise HigherLevelsPresentError(f"component {sorted(a)} is nonzero")
            continue
        total = total + (comp.values**2).sum(axis=value_axes) if value_axes else total + comp.values**2
    return TensorField((base,) * n, np.sqrt(total))


def decoupled_square_moment(f: TensorField, p: float, max_level: int) -> float:
    """``sum_{m <= M} E (sum_i f_i(x^(1)_{i_1}, ..., x^(m)_{i_m})^2)^(p/2)`` over extracted kernels."""
    _, n = coordinates(f)
    total = []
    for m in range(min(max_level, n) + 1):
        total.append(ustat_moment(extract_kernels(f, m), 2.0, p, mode="decoupled").value)
    return math.fsum(total)


def certificate_spec(m: int, inner_slots: Sequence[int], inner_p: float, outer_p: float = 1.0) -> NormSpec:
    """``L^{outer_p}(slots outside J, L^{inner_p}(slots in J))`` for a field on ``m`` slot axes (1-based ``J``)."""
    inner_axes = [s - 1 for s in sorted(inner_slots)]
    outer_axes = [ax for ax in range(m) if ax not in inner_axes]
    return mixed(outer_p, outer_axes, inner_p, inner_axes)


_COUPLE_TOKEN = re.compile(r"^L(\d+(?:\.\d+)?)(?:\(l(\d+(?:\.\d+)?)\))?$")


def parse_couple(text: str, ndim: int) -> Couple:
    """Parse ``"L1,L2"`` or ``"L1(l2),L2(l2)"`` into a couple over ``ndim`` axes.

    A bracketed inner exponent applies to the last axis, the outer one to
    the others.
    """
    tokens = [tok.strip() for tok in text.split(",")]
    if len(tokens) != 2:
        raise BadSpecError(f"couple needs two norms, got {text!r}")
    specs = []
    for tok in tokens:
        match = _COUPLE_TOKEN.match(tok)
        if match is None:
            raise BadSpecError(f"cannot parse norm {tok!r}")
        outer = float(match.group(1))
        if match.group(2) is None:
            specs.append(lp(outer, range(ndim)))
        else:
            specs.append(mixed(outer, range(ndim - 1), float(match.group(2)), (ndim - 1,)))
    return Couple(specs[0], specs[1])
