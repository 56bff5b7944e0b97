"""Finite measure spaces, products, disjoint unions and exact integration."""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence

import numpy as np

from .core_models import MAX_ELEMENTS, KernelFamily, Space, SpaceKind, TensorField
from .utils.errors import BadAxisError, InvalidMeasureError, NotProbabilityError, TooLargeError

PROBABILITY_TOL = 1e-12


def check_guard(count: int, max_elements: int = MAX_ELEMENTS) -> None:
    if count > max_elements:
        raise TooLargeError(count, max_elements)


def make_space(weights: Sequence[float], kind: SpaceKind = "probability") -> Space:
    """Build a finite measure space with atoms ``1..len(weights)``.

    Raises:
        InvalidMeasureError: empty list or a nonpositive weight.
        NotProbabilityError: ``probability`` weights not summing to 1.
    """
    ws = tuple(float(w) for w in weights)
    if not ws or any(not w > 0.0 or not math.isfinite(w) for w in ws):
        raise InvalidMeasureError("weights must be a nonempty list of positive reals")
    if kind == "probability" and abs(math.fsum(ws) - 1.0) > PROBABILITY_TOL:
        raise NotProbabilityError(f"probability weights sum to {math.fsum(ws)!r}")
    if kind == "hilbert_value" and any(w != 1.0 for w in ws):
        raise InvalidMeasureError("hilbert_value axes carry counting measure")
    return Space(weights=ws, kind=kind)


def uniform(r: int) -> Space:
    return make_space([1.0 / r] * r, "probability")


def counting(r: int) -> Space:
    return make_space([1.0] * r, "sigma_finite")


def hilbert_axis(dim: int) -> Space:
    return make_space([1.0] * dim, "hilbert_value")


def product(spaces: Sequence[Space], max_elements: int = MAX_ELEMENTS) -> Space:
    """Cartesian product with product weights, atoms in row-major order."""
    if not spaces:
        raise InvalidMeasureError("product of an empty list")
    if len(spaces) == 1:
        return spaces[0]
    check_guard(math.prod(s.size for s in spaces), max_elements)
    ws = np.ones(1)
    for s in spaces:
        ws = np.multiply.outer(ws, s.w).ravel()
    kind: SpaceKind = "probability" if all(s.kind == "probability" for s in spaces) else "sigma_finite"
    return Space(weights=tuple(float(w) for w in ws), kind=kind, factors=tuple(spaces))


def disjoint_union(spaces: Sequence[Space], max_elements: int = MAX_ELEMENTS) -> Space:
    """Concatenate atoms of ``spaces``; the result is ``sigma_finite``."""
    if not spaces:
        raise InvalidMeasureError("disjoint union of an empty list")
    check_guard(sum(s.size for s in spaces), max_elements)
    offsets = tuple(int(v) for v in np.cumsum([0] + [s.size for s in spaces[:-1]]))
    weights = tuple(w for s in spaces for w in s.weights)
    return Space(weights=weights, kind="sigma_finite", block_offsets=offsets)


def coproduct_axis(base: Space, n: int) -> Space:
    """``n`` disjoint copies of ``base``."""
    return disjoint_union([base] * n)


def field(axes: Sequence[Space], values: np.ndarray | float, max_elements: int = MAX_ELEMENTS) -> TensorField:
    check_guard(math.prod(ax.size for ax in axes), max_elements)
    arr = np.asarray(values, dtype=float)
    if arr.shape != tuple(ax.size for ax in axes):
        arr = np.broadcast_to(arr, tuple(ax.size for ax in axes))
    return TensorField(tuple(axes), arr)


def constant(axes: Sequence[Space], c: float) -> TensorField:
    return field(axes, np.full(tuple(ax.size for ax in axes), float(c)))


def indicator(axes: Sequence[Space], atom: Sequence[int]) -> TensorField:
    """Indicator of a single atom multi-index (1-based atoms)."""
    arr = np.zeros(tuple(ax.size for ax in axes))
    arr[tuple(a - 1 for a in atom)] = 1.0
    return field(axes, arr)


def tensor(g: TensorField, h: TensorField) -> TensorField:
    """Separated-variable product ``(g x h)(x, y) = g(x) h(y)``."""
    return field(g.axes + h.axes, np.multiply.outer(g.values, h.values))


def permute_atoms(f: TensorField, perm: Sequence[int], axes: Iterable[int] | None = None) -> TensorField:
    """Relabel atoms along ``axes`` by the 0-based permutation ``perm``."""
    arr = f.values
    for ax in f.coordinate_axes if axes is None else axes:
        arr = np.take(arr, np.asarray(perm), axis=ax)
    return f.with_values(arr)


def _check_axes(f: TensorField, axes: Iterable[int]) -> tuple[int, ...]:
    out = tuple(sorted(set(axes)))
    for ax in out:
        if not 0 <= ax < f.ndim:
            raise BadAxisError(f"axis {ax} not in field with {f.ndim} axes")
    return out


def integrate(f: TensorField, axes: Iterable[int] | None = None) -> TensorField:
    """Integrate ``f`` over the given 0-based axis positions (all when omitted).

    Raises:
        BadAxisError: unknown axis or a ``hilbert_value`` axis.
    """
    targets = _check_axes(f, range(f.ndim) if axes is None else axes)
    for ax in targets:
        if f.axes[ax].kind == "hilbert_value":
            raise BadAxisError(f"axis {ax} is a value axis and cannot be integrated")
    arr = f.values
    for ax in reversed(targets):
        arr = np.tensordot(arr, f.axes[ax].w, axes=([ax], [0]))
    rest = tuple(a for k, a in enumerate(f.axes) if k not in targets)
    return TensorField(rest, arr)


def expectation(f: TensorField) -> float:
    return integrate(f).scalar()


def family_to_coproduct(k: KernelFamily, max_elements: int = MAX_ELEMENTS) -> TensorField:
    """Identify ``{f_i}`` with one scalar field on ``(n copies of Omega)^m``.

    Atom ``x`` of block ``i`` sits at position ``(i - 1) * |Omega| + x - 1``.
    """
    if k.value_dim is not None:
        raise BadAxisError("coproduct fields are scalar")
    r, n, m = k.base.size, k.n, k.m
    check_guard((n * r) ** m, max_elements)
    arr = np.zeros((n, r) * m)
    for idx, kern in k.kernels.items():
        sel: list[object] = []
        for i in idx:
            sel.extend([i - 1, slice(None)])
        arr[tuple(sel)] = kern.values
    bar = coproduct_axis(k.base, n)
    return TensorField((bar,) * m, arr.reshape((n * r,) * m))


def coproduct_to_family(f: TensorField, base: Space, n: int, strict: bool = False) -> KernelFamily:
    """Split a field on ``(n copies of base)^m`` back into kernels (zero kernels dropped)."""
    m, r = f.ndim, base.size
    arr = f.values.reshape((n, r) * m)
    kernels: dict[tuple[int, ...], TensorField] = {}
    for idx in np.ndindex(*(n,) * m):
        tup = tuple(i + 1 for i in idx)
        if strict and any(a >= b for a, b in zip(tup, tup[1:], strict=False)):
            continue
        sel: list[object] = []
        for i in idx:
            sel.extend([i, slice(None)])
        block = arr[tuple(sel)]
        if np.any(block != 0.0):
            kernels[tup] = TensorField((base,) * m, block)
    return KernelFamily(m=m, n=n, base=base, kernels=kernels, strict=strict)


def split_blocks(f: TensorField) -> np.ndarray:
    """View a field on equal-block coproduct axes as shape ``(n, r) * m``."""
    shape: list[int] = []
    for ax in f.axes:
        n = ax.blocks
        shape.extend([n, ax.size // n])
    return f.values.reshape(shape)


def atoms_field(mass: float, values: Sequence[float]) -> TensorField:
    """Field on ``len(values)`` atoms of equal ``mass``; a probability space when the masses sum to 1."""
    vals = [float(v) for v in values]
    total = mass * len(vals)
    if abs(total - 1.0) <= PROBABILITY_TOL:
        space = make_space([1.0 / len(vals)] * len(vals), "probability")
    else:
        space = make_space([mass] * len(vals), "sigma_finite")
    return field((space,), np.asarray(vals))
