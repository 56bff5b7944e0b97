"""Constructive decompositions of nonnegative kernel families.

Families of ``m``-variable kernels indexed by ``[1,n]^m`` are handled as one
array laid out ``(n,) * m + (r,) * m`` (index slots, then atoms) and reported
as fields on ``Omega_bar^m``, ``Omega_bar`` being ``n`` disjoint copies of
``Omega``. A part ``J`` (1-based slots) is certified by
``L^1(Omega_bar^{J'}, L^p(Omega_bar^J))``.

Every split is a level cut: after normalizing a one-variable family by its
left-hand side ``E (sum_i f_i(x_i)^p)^(1/p)``, values ``>= 1`` go to the
``L^1`` part and the rest to the ``L^p`` part. Zeros go to the ``L^1`` part.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Mapping, Sequence
from itertools import product as iproduct
from typing import Any

import numpy as np

from .core_models import Decomposition, KernelFamily, Space, TensorField, WeightFamily
from .hoeffding import assemble_ustat
from .norms import certificate_spec, norm, ustat_lhs
from .spaces import MAX_ELEMENTS, check_guard, coproduct_axis
from .utils.errors import (
    BadInstanceError,
    BadLevelError,
    BadSpecError,
    BadThresholdError,
    NotADecompositionError,
    NotCanonicalError,
    NotNonnegativeError,
    TooLargeError,
)

DEFAULT_CAPS = {1: 64.0, 2: 1024.0, 3: float(2**20)}
MAX_DEPTH = 3
THRESHOLD_TOL = 1e-12
RECONSTRUCTION_TOL = 1e-12
MEAN_ZERO_TOL = 1e-10

FOUR_SUMMAND_INNER = {"a": (), "b": (1, 2), "c": (2,), "d": (1,)}

logger = logging.getLogger(__name__)


def phi_constant(p: float) -> float:
    """Bound on ``int g + int h^p`` for the normalized level cut: ``2p + 2^(2p-1)``."""
    return 2.0 * p + 2.0 ** (2.0 * p - 1.0)


def part_name(slots: Sequence[int]) -> str:
    return "{" + ",".join(str(s) for s in sorted(slots)) + "}"


def subset_order(m: int) -> list[tuple[int, ...]]:
    """Subsets of ``[1,m]`` in lexicographic order of ``(1 in J, ..., m in J)``."""
    return [tuple(s + 1 for s in range(m) if bits[s]) for bits in iproduct((0, 1), repeat=m)]


# level cut and disjointization on plain fields


def level_cut(f: TensorField, lam: float) -> tuple[TensorField, TensorField]:
    """``(f 1{f >= lam}, f 1{f < lam})``.

    Raises:
        BadLevelError: ``lam <= 0``.
        NotNonnegativeError: ``f`` takes a negative value.
    """
    if not lam > 0.0:
        raise BadLevelError(f"cut level must be positive, got {lam!r}")
    if np.any(f.values < 0.0):
        raise NotNonnegativeError("level cut needs a nonnegative field")
    high = f.values >= lam
    return f.with_values(np.where(high, f.values, 0.0)), f.with_values(np.where(high, 0.0, f.values))


def disjointize(f: TensorField, g: TensorField, h: TensorField) -> tuple[TensorField, TensorField]:
    """Give the whole of ``f(x)`` to ``g`` where ``g(x) >= h(x)``, else to ``h``."""
    scale = max(1.0, float(np.abs(f.values).max(initial=0.0)))
    if float(np.abs(g.values + h.values - f.values).max(initial=0.0)) > RECONSTRUCTION_TOL * scale:
        raise NotADecompositionError("g + h does not reconstruct f")
    to_g = g.values >= h.values
    return f.with_values(np.where(to_g, f.values, 0.0)), f.with_values(np.where(to_g, 0.0, f.values))


# batched helpers shared by the pipelines


def _product_weight(w: np.ndarray, count: int) -> np.ndarray:
    out = np.ones(())
    for _ in range(count):
        out = np.multiply.outer(out, w)
    return out


def _js_lhs(arr: np.ndarray, w: np.ndarray, p: float, max_elements: int = MAX_ELEMENTS) -> np.ndarray:
    """``E (sum_i arr[..., i, x_i]^p)^(1/p)`` for every leading batch entry of ``arr[..., n, r]``."""
    *batch, n, r = arr.shape
    b = len(batch)
    check_guard(math.prod(batch) * r**n, max_elements)
    powered = arr**p
    total = np.zeros(tuple(batch) + (r,) * n)
    for i in range(n):
        shape = list(batch) + [1] * n
        shape[b + i] = r
        total = total + powered[..., i, :].reshape(shape)
    return (total ** (1.0 / p) * _product_weight(w, n)).sum(axis=tuple(range(b, b + n)))


def _js_mask(arr: np.ndarray, w: np.ndarray, p: float, max_elements: int = MAX_ELEMENTS) -> np.ndarray:
    """``L^1``-side mask of the level cut of ``arr[..., n, r]`` at its own left-hand side."""
    lhs = _js_lhs(arr, w, p, max_elements)
    return (arr >= lhs[..., None, None]) | (arr == 0.0)


def _threshold(avg: np.ndarray, level: float) -> np.ndarray:
    return avg >= level - THRESHOLD_TOL


def _reduce_last_slot(arr: np.ndarray, batch: int, m: int, p: float) -> np.ndarray:
    """``F(..., y) = (sum_k arr[..., k, ..., y_k]^p)^(1/p)`` with the ``y`` axes moved to the batch.

    ``arr`` has layout ``batch + (n,) * (m+1) + (r,) * (m+1)``; the result has
    ``batch + (r,) * n + (n,) * m + (r,) * m``.
    """
    n = arr.shape[batch + m]
    r = arr.shape[-1]
    powered = arr**p
    lead = arr.shape[:batch] + arr.shape[batch : batch + m] + arr.shape[batch + m + 1 : batch + 2 * m + 1]
    total = np.zeros(lead + (r,) * n)
    for k in range(n):
        piece = np.take(powered, k, axis=batch + m)
        total = total + piece.reshape(lead + (1,) * k + (r,) + (1,) * (n - k - 1))
    reduced = total ** (1.0 / p)
    start = batch + 2 * m
    return np.moveaxis(reduced, tuple(range(start, start + n)), tuple(range(batch, batch + n)))


def _average_except(mask: np.ndarray, w: np.ndarray, batch: int, m: int) -> np.ndarray:
    """``E_k`` of a mask over the ``y`` axes: stacked into ``batch + (n,) * m + (n,) + (r,) * m + (r,)``."""
    n = mask.ndim - batch - 2 * m
    vals = mask.astype(float)
    pieces = []
    for k in range(n):
        cur = vals
        for l in reversed(range(n)):
            if l == k:
                continue
            cur = _weighted_sum(cur, w, batch + l)
        pieces.append(np.moveaxis(cur, batch, -1))
    return np.stack(pieces, axis=batch + m)


def _weighted_sum(arr: np.ndarray, w: np.ndarray, axis: int) -> np.ndarray:
    shape = [1] * arr.ndim
    shape[axis] = w.size
    return (arr * w.reshape(shape)).sum(axis=axis)


def _slot_norm(arr: np.ndarray, w: np.ndarray, batch: int, m: int, slots: Sequence[int], p: float) -> np.ndarray:
    """``(int over Omega_bar^slots of arr^p)^(1/p)``, reduced axes kept with length 1."""
    axes = [batch + s - 1 for s in slots] + [batch + m + 1 + s - 1 for s in slots]
    if not slots:
        return arr
    shape = [1] * arr.ndim
    weight = np.ones(shape)
    for s in slots:
        ws = shape.copy()
        ws[batch + m + 1 + s - 1] = w.size
        weight = weight * w.reshape(ws)
    return ((arr**p) * weight).sum(axis=tuple(axes), keepdims=True) ** (1.0 / p)


def _split_new_slot(phi: np.ndarray, w: np.ndarray, batch: int, m: int, p: float, max_elements: int) -> np.ndarray:
    """Level-cut mask over ``(k, y_k)`` at every fixed ``x_bar^{J'}`` of ``phi``."""
    k_axis, y_axis = batch + m, phi.ndim - 1
    moved = np.moveaxis(phi, (k_axis, y_axis), (-2, -1))
    mask = _js_mask(moved, w, p, max_elements)
    return np.moveaxis(mask, (-2, -1), (k_axis, y_axis))


def _cleanup(
    masks: dict[tuple[int, ...], np.ndarray], values: np.ndarray, arity: int
) -> dict[tuple[int, ...], np.ndarray]:
    """Give each point to the first ``J`` (subset order) whose part holds at least ``2^-arity`` of it."""
    assigned = np.zeros(values.shape, dtype=bool)
    out: dict[tuple[int, ...], np.ndarray] = {}
    level = 2.0 ** (-arity)
    for slots in subset_order(arity):
        part = np.where(masks.get(slots, False), values, 0.0)
        ok = (part >= level * values) & ~assigned
        out[slots] = ok
        assigned |= ok
    return out


def _masks(
    arr: np.ndarray, w: np.ndarray, p: float, m: int, batch: int, max_elements: int
) -> dict[tuple[int, ...], np.ndarray]:
    """Binary partition masks ``J -> mask`` of a nonnegative array ``batch + (n,) * m + (r,) * m``."""
    if m == 1:
        first = _js_mask(arr, w, p, max_elements)
        return {(): first, (1,): ~first}
    inner = m - 1
    reduced = _reduce_last_slot(arr, batch, inner, p)
    n = arr.shape[batch]
    check_guard(reduced.size, max_elements)
    sub = _masks(reduced, w, p, inner, batch + n, max_elements)
    raw: dict[tuple[int, ...], np.ndarray] = {}
    for slots in subset_order(inner):
        big_w = _threshold(_average_except(sub[slots], w, batch, inner), 2.0 ** (-inner))
        weighted = np.where(big_w, arr, 0.0)
        phi = _slot_norm(weighted, w, batch, inner, slots, p)
        first = np.broadcast_to(_split_new_slot(phi, w, batch, inner, p, max_elements), arr.shape)
        raw[slots] = big_w & first
        raw[slots + (m,)] = big_w & ~first
    return _cleanup(raw, arr, m)


# layout conversion


def family_array(k: KernelFamily) -> np.ndarray:
    """Dense ``(n,) * m + (r,) * m`` array of a scalar family (missing tuples are 0)."""
    if k.value_dim is not None:
        raise BadInstanceError("decompositions take scalar kernels")
    arr = np.zeros((k.n,) * k.m + (k.base.size,) * k.m)
    for idx, kern in k.kernels.items():
        arr[tuple(i - 1 for i in idx)] = kern.values
    return arr


def to_coproduct(arr: np.ndarray, base: Space, m: int) -> TensorField:
    n, r = arr.shape[0], arr.shape[-1]
    order = [ax for s in range(m) for ax in (s, m + s)]
    return TensorField((coproduct_axis(base, n),) * m, np.transpose(arr, order).reshape((n * r,) * m))


def from_coproduct(f: TensorField, m: int) -> np.ndarray:
    n = f.axes[0].blocks
    r = f.axes[0].size // n
    inter = f.values.reshape((n, r) * m)
    return np.transpose(inter, [2 * s for s in range(m)] + [2 * s + 1 for s in range(m)])


def _family_lhs(arr: np.ndarray, base: Space, m: int, p: float) -> float:
    n = arr.shape[0]
    kernels = {
        tuple(i + 1 for i in idx): TensorField((base,) * m, np.abs(arr[idx]))
        for idx in np.ndindex(*(n,) * m)
        if np.any(arr[idx])
    }
    return ustat_lhs(KernelFamily(m=m, n=n, base=base, kernels=kernels, strict=False), p, mode="decoupled").value


def _build(
    arr: np.ndarray,
    base: Space,
    m: int,
    p: float,
    masks: Mapping[Any, np.ndarray],
    names: Mapping[Any, str],
    inner: Mapping[Any, tuple[int, ...]],
    provenance: Mapping[Any, str],
    meta: dict[str, Any],
) -> Decomposition:
    target = to_coproduct(arr, base, m)
    parts: dict[str, TensorField] = {}
    specs = {}
    certs: dict[str, float] = {}
    for key, mask in masks.items():
        name = names[key]
        parts[name] = to_coproduct(np.where(mask, arr, 0.0), base, m)
        specs[name] = certificate_spec(m, inner[key], p)
        certs[name] = norm(parts[name], specs[name])
    return Decomposition(
        target=target,
        parts=parts,
        inner={names[key]: tuple(inner[key]) for key in masks},
        specs=specs,
        certificates=certs,
        disjoint=True,
        lhs=_family_lhs(arr, base, m, p),
        provenance={names[key]: provenance[key] for key in masks},
        meta=meta,
    )


def _check_p(p: float) -> None:
    if not p >= 1.0 or not math.isfinite(p):
        raise BadSpecError(f"decompositions need 1 <= p < inf, got {p!r}")


# pipelines


def js_decompose(fields: Sequence[TensorField], p: float) -> Decomposition:
    """Level cut of ``{f_i}`` on ``n`` copies of ``Omega`` at the family's left-hand side.

    Signed inputs are cut by absolute value and keep their signs.
    """
    _check_p(p)
    if not fields:
        raise BadInstanceError("empty family")
    base = fields[0].axes[0]
    if any(fl.axes != (base,) for fl in fields):
        raise BadInstanceError("all functions must live on one space")
    arr = np.stack([fl.values for fl in fields])
    mag = np.abs(arr)
    lhs = float(_js_lhs(mag, base.w, p))
    first = _js_mask(mag, base.w, p)
    meta: dict[str, Any] = {"p": p, "phi_constant": phi_constant(p)}
    if lhs > 0.0:
        g = np.where(first, mag, 0.0) / lhs
        h = np.where(first, 0.0, mag) / lhs
        w = np.tile(base.w, len(fields)).reshape(arr.shape)
        meta["phi_integral"] = math.fsum((w * g).ravel()) + math.fsum((w * h**p).ravel())
    else:
        meta["phi_integral"] = 0.0
    out = _build(
        arr,
        base,
        1,
        p,
        {(): first, (1,): ~first},
        {(): "g", (1,): "h"},
        {(): (), (1,): (1,)},
        {(): "level cut: at or above the left-hand side", (1,): "level cut: below the left-hand side"},
        meta,
    )
    out.lhs = lhs
    return out


def threshold_weights(
    w: WeightFamily,
    kappa: float,
    eps: float = 0.0,
    keep: Sequence[int] | Mapping[Any, Sequence[int]] = (0,),
) -> WeightFamily:
    """``1{E(w v eps | kept axes) >= kappa}`` per weight, broadcast back to the full axes.

    ``keep`` lists the 0-based axes that are retained (the others are
    averaged), either once for all keys or per key.

    Raises:
        BadThresholdError: ``kappa`` outside ``(eps, 1]`` or ``eps < 0``.
    """
    if not 0.0 < kappa <= 1.0 or eps < 0.0 or not kappa > eps:
        raise BadThresholdError(f"need 0 <= eps < kappa <= 1, got kappa={kappa!r} eps={eps!r}")
    out: dict[Any, TensorField] = {}
    for key, wf in w.weights.items():
        kept = set(keep[key] if isinstance(keep, Mapping) else keep)
        vals = np.maximum(wf.values, eps)
        for ax in range(wf.ndim):
            if ax not in kept:
                vals = np.broadcast_to(_mean_keep(vals, wf.axes[ax].w, ax), wf.values.shape)
        out[key] = wf.with_values(_threshold(vals, kappa).astype(float))
    return WeightFamily(out)


def _mean_keep(arr: np.ndarray, w: np.ndarray, axis: int) -> np.ndarray:
    shape = [1] * arr.ndim
    shape[axis] = w.size
    return (arr * w.reshape(shape)).sum(axis=axis, keepdims=True)


def four_summand(k: KernelFamily, p: float, max_elements: int = MAX_ELEMENTS) -> Decomposition:
    """Four disjoint parts ``a, b, c, d`` of a two-variable family ``f_{i,j}(xi, eta)``.

    1. ``F_i(xi, y) = (sum_j f_ij(xi, y_j)^p)^(1/p)``; at every ``y`` the level
       cut over ``i`` gives ``w_i(xi, y)``.
    2. ``W_ij(xi, eta) = 1{E_j w_i(xi, .) >= 1/2}``.
    3. At every ``(i, xi)``, the cut over ``j`` of ``W f`` gives ``u``;
       ``a = u W f`` and ``c = (1 - u) W f``.
    4. ``G_j(eta) = (sum_i int ((1 - W) f)_ij^p)^(1/p)``; the cut over ``j``
       gives ``s``; ``d = s (1 - W) f`` and ``b = (1 - s)(1 - W) f``.
    """
    _check_p(p)
    if k.m != 2:
        raise BadInstanceError("four_summand takes two-variable kernels")
    arr = family_array(k)
    mag = np.abs(arr)
    w = k.base.w
    n = k.n
    check_guard(mag.size * k.base.size**n, max_elements)

    reduced = _reduce_last_slot(mag, 0, 1, p)
    small_w = _js_mask(reduced, w, p, max_elements)
    big_w = _threshold(_average_except(small_w, w, 0, 1), 0.5)

    inside = np.where(big_w, mag, 0.0)
    u = np.broadcast_to(_split_new_slot(inside, w, 0, 1, p, max_elements), mag.shape)

    outside = np.where(big_w, 0.0, mag)
    g = _slot_norm(outside, w, 0, 1, (1,), p)
    s = np.broadcast_to(_split_new_slot(g, w, 0, 1, p, max_elements), mag.shape)

    masks = {"a": big_w & u, "c": big_w & ~u, "d": ~big_w & s, "b": ~big_w & ~s}
    provenance = {
        "a": "W=1, L1 side of the split over j",
        "c": "W=1, Lp side of the split over j",
        "d": "W=0, L1 side of the split of G over j",
        "b": "W=0, Lp side of the split of G over j",
    }
    meta = {"p": p, "cap": DEFAULT_CAPS[2], "w_mass": float(big_w.mean())}
    out = _build(arr, k.base, 2, p, masks, {x: x for x in masks}, FOUR_SUMMAND_INNER, provenance, meta)
    logger.debug("four_summand certificates %s, lhs %.6g", out.certificates, out.lhs)
    return out


def multilevel_decompose(
    k: KernelFamily, p: float, max_depth: int = MAX_DEPTH, max_elements: int = MAX_ELEMENTS
) -> Decomposition:
    """``2^m`` disjoint parts indexed by ``J subset [1,m]`` by induction on ``m``.

    The ``m - 1`` variable masks computed at every value ``y`` of the last
    copy are averaged over ``y`` with ``y_k`` fixed and thresholded at
    ``2^-(m-1)``; the new slot is then split by a level cut over ``(k, y_k)``
    of ``(int over Omega_bar^J of (W f)^p)^(1/p)``. Finally every point goes
    to the first ``J`` in subset order whose part holds ``2^-m`` of it.

    Raises:
        TooLargeError: ``m > max_depth`` or an intermediate array exceeds the guard.
    """
    _check_p(p)
    if k.m < 1:
        raise BadInstanceError("multilevel_decompose needs m >= 1")
    if k.m > max_depth:
        raise TooLargeError(k.m, max_depth)
    arr = family_array(k)
    masks = _masks(np.abs(arr), k.base.w, p, k.m, 0, max_elements)
    order = subset_order(k.m)
    names = {slots: part_name(slots) for slots in order}
    provenance = {slots: f"level {k.m} split, slots {part_name(slots)} in Lp" for slots in order}
    meta = {"p": p, "cap": DEFAULT_CAPS.get(k.m, math.inf)}
    return _build(arr, k.base, k.m, p, {s: masks[s] for s in order}, names, {s: s for s in order}, provenance, meta)


def _mean_zero_blocks(arr: np.ndarray, w: np.ndarray, m: int) -> np.ndarray:
    out = arr
    for s in range(m):
        out = out - _mean_keep(out, w, m + s)
    return out


def _max_mean(arr: np.ndarray, w: np.ndarray, m: int) -> float:
    return max((float(np.abs(_mean_keep(arr, w, m + s)).max(initial=0.0)) for s in range(m)), default=0.0)


def mean_zero_postprocess(d: Decomposition, m: int) -> Decomposition:
    """Apply ``(id - E)^{(x) m}`` blockwise to every part; certificates are recomputed.

    Raises:
        NotCanonicalError: the target is not mean zero in every variable.
    """
    base_w = np.asarray(d.target.axes[0].weights[: d.target.axes[0].size // d.target.axes[0].blocks])
    target = from_coproduct(d.target, m)
    scale = max(1.0, float(np.abs(target).max(initial=0.0)))
    if _max_mean(target, base_w, m) > MEAN_ZERO_TOL * scale:
        raise NotCanonicalError("target kernels are not mean zero in every variable")
    parts: dict[str, TensorField] = {}
    certs: dict[str, float] = {}
    for name, part in d.parts.items():
        projected = _mean_zero_blocks(from_coproduct(part, m), base_w, m)
        n, r = projected.shape[0], projected.shape[-1]
        order = [ax for s in range(m) for ax in (s, m + s)]
        parts[name] = part.with_values(np.transpose(projected, order).reshape((n * r,) * m))
        certs[name] = norm(parts[name], d.specs[name])
    return Decomposition(
        target=d.target,
        parts=parts,
        inner=dict(d.inner),
        specs=dict(d.specs),
        certificates=certs,
        disjoint=False,
        lhs=d.lhs,
        provenance={name: f"{src}, mean-zero projection" for name, src in d.provenance.items()},
        meta={**d.meta, "postprocessed": True},
    )


def canonical_decompose(k: KernelFamily, p: float, max_elements: int = MAX_ELEMENTS) -> Decomposition:
    """Decomposition of a canonical U-statistic for ``1 <= p <= 2``.

    Masks come from the ``2^m`` pipeline applied to ``|f|^p`` with exponent
    ``2/p``; the masked parts are projected back to mean zero and certified by
    ``L^p(Omega_bar^{J'}, L^2(Omega_bar^J))``. ``lhs`` is ``||f||_{L^p}`` of
    the coupled U-statistic.
    """
    if not 1.0 <= p <= 2.0:
        raise BadSpecError(f"canonical decompositions need 1 <= p <= 2, got {p!r}")
    if not k.strict or k.m < 1:
        raise BadInstanceError("canonical decompositions take strict families with m >= 1")
    if k.m > MAX_DEPTH:
        raise TooLargeError(k.m, MAX_DEPTH)
    arr = family_array(k)
    w = k.base.w
    scale = max(1.0, float(np.abs(arr).max(initial=0.0)))
    if _max_mean(arr, w, k.m) > MEAN_ZERO_TOL * scale:
        raise NotCanonicalError("kernels are not mean zero in every variable")
    masks = _masks(np.abs(arr) ** p, w, 2.0 / p, k.m, 0, max_elements)
    order = subset_order(k.m)
    target = to_coproduct(arr, k.base, k.m)
    parts: dict[str, TensorField] = {}
    specs = {}
    certs: dict[str, float] = {}
    n, r = arr.shape[0], arr.shape[-1]
    perm = [ax for s in range(k.m) for ax in (s, k.m + s)]
    for slots in order:
        name = part_name(slots)
        projected = _mean_zero_blocks(np.where(masks[slots], arr, 0.0), w, k.m)
        parts[name] = target.with_values(np.transpose(projected, perm).reshape((n * r,) * k.m))
        specs[name] = certificate_spec(k.m, slots, 2.0, outer_p=p)
        certs[name] = norm(parts[name], specs[name])
    ustat = assemble_ustat(k, decoupled=False, max_elements=max_elements)
    lhs = float(np.sum(_product_weight(w, k.n) * np.abs(ustat.values) ** p) ** (1.0 / p))
    return Decomposition(
        target=target,
        parts=parts,
        inner={part_name(s): s for s in order},
        specs=specs,
        certificates=certs,
        disjoint=False,
        lhs=lhs,
        provenance={part_name(s): "masks of |f|^p, mean-zero projection" for s in order},
        meta={"p": p, "postprocessed": True},
    )


def check_reconstruction(d: Decomposition) -> float:
    """Largest absolute entry of ``sum(parts) - target``."""
    total = sum((part.values for part in d.parts.values()), np.zeros(d.target.values.shape))
    return float(np.abs(total - d.target.values).max(initial=0.0))


def check_disjoint(d: Decomposition) -> bool:
    support = np.zeros(d.target.values.shape, dtype=int)
    for part in d.parts.values():
        support += (part.values != 0.0).astype(int)
    return bool(np.all(support <= 1))
