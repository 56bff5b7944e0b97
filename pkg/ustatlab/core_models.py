"""Core runtime data models for ustat-lab.

These dataclasses are the runtime model shared by the numerical modules
(``spaces``, ``hoeffding``, ``norms``, ``interp``, ``decomp``) and by the check
plugins under ``ustatlab.verify``. They hold dense ``numpy`` arrays and are
treated as immutable once built: every operation returns new objects.

Validation-oriented models used for configuration files and report rows live in
``ustatlab.pyd_models``.

Conventions:
    * Coordinates of a product ``Omega^n`` and index tuples of kernel families
      are 1-based, array axis positions are 0-based.
    * ``hilbert_value`` axes are trailing axes carrying a finite-dimensional
      Euclidean value; expectations never integrate them.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal

import numpy as np

from .utils.errors import BadAxisError, BadSpecError, NonFiniteValueError, TooLargeError

MAX_ELEMENTS = 2**24
"""Default size guard: most elements any field or enumeration may hold."""

SpaceKind = Literal["probability", "sigma_finite", "hilbert_value"]

ProjectionIndex = frozenset[int]
"""A subset ``A`` of coordinate positions ``[1, n]``."""

Projector = Callable[[np.ndarray], np.ndarray]
"""An idempotent linear map acting on the raw value array of a fixed field layout."""


@dataclass(frozen=True)
class Space:
    """A finite measure space.

    Attributes:
        weights: Mass of each atom, atoms are numbered ``1..len(weights)``.
        kind: ``probability``, ``sigma_finite`` or ``hilbert_value``.
        block_offsets: For disjoint unions, the first atom of each block.
        factors: For products, the component spaces in row-major order.
    """

    weights: tuple[float, ...]
    kind: SpaceKind = "probability"
    block_offsets: tuple[int, ...] = (0,)
    factors: tuple[Space, ...] = ()

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def atoms(self) -> tuple[int, ...]:
        return tuple(range(1, self.size + 1))

    @property
    def mass(self) -> float:
        return math.fsum(self.weights)

    @property
    def w(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)

    @property
    def blocks(self) -> int:
        return len(self.block_offsets)


@dataclass(frozen=True, eq=False)
class TensorField:
    """A real function on a product of spaces, stored densely.

    Attributes:
        axes: One ``Space`` per array axis.
        values: Array whose shape is ``tuple(ax.size for ax in axes)``.

    At most ``MAX_ELEMENTS`` values; larger fields raise ``TooLargeError``
    before anything is allocated.
    """

    axes: tuple[Space, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        shape = tuple(ax.size for ax in self.axes)
        count = math.prod(shape)
        if count > MAX_ELEMENTS:
            raise TooLargeError(count, MAX_ELEMENTS)
        arr = np.array(self.values, dtype=float, copy=True)
        if arr.shape != shape:
            raise BadAxisError(f"value shape {arr.shape} does not match axes {shape}")
        if not np.all(np.isfinite(arr)):
            raise NonFiniteValueError("field values must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "axes", tuple(self.axes))
        object.__setattr__(self, "values", arr)

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def size(self) -> int:
        return int(self.values.size)

    @property
    def block_offsets(self) -> tuple[tuple[int, ...], ...]:
        return tuple(ax.block_offsets for ax in self.axes)

    @property
    def coordinate_axes(self) -> tuple[int, ...]:
        return tuple(k for k, ax in enumerate(self.axes) if ax.kind != "hilbert_value")

    @property
    def value_axes(self) -> tuple[int, ...]:
        return tuple(k for k, ax in enumerate(self.axes) if ax.kind == "hilbert_value")

    def scalar(self) -> float:
        if self.axes:
            raise BadAxisError("field still has axes")
        return float(self.values)

    def with_values(self, values: np.ndarray) -> TensorField:
        return TensorField(self.axes, values)


@dataclass(frozen=True, eq=False)
class KernelFamily:
    """An indexed family of ``m``-variable kernels on a base space.

    Attributes:
        m: Arity of every kernel.
        n: Number of coordinates indices are drawn from.
        base: The probability space ``Omega``.
        kernels: Map from index tuples in ``[1, n]^m`` to kernels whose first
            ``m`` axes are ``base`` (plus at most one trailing value axis).
        strict: When true every index tuple is strictly increasing.
    """

    m: int
    n: int
    base: Space
    kernels: Mapping[tuple[int, ...], TensorField]
    strict: bool = True

    def __post_init__(self) -> None:
        kernels = dict(self.kernels)
        for idx, kern in kernels.items():
            if len(idx) != self.m or any(not 1 <= i <= self.n for i in idx):
                raise BadAxisError(f"index tuple {idx} outside [1,{self.n}]^{self.m}")
            if self.strict and any(a >= b for a, b in zip(idx, idx[1:], strict=False)):
                raise BadAxisError(f"index tuple {idx} is not strictly increasing")
            head = kern.axes[: self.m]
            tail = kern.axes[self.m :]
            if head != (self.base,) * self.m or len(tail) > 1 or any(ax.kind != "hilbert_value" for ax in tail):
                raise BadAxisError(f"kernel {idx} must have {self.m} base axes and at most one value axis")
        object.__setattr__(self, "kernels", kernels)

    @property
    def value_dim(self) -> int | None:
        for kern in self.kernels.values():
            if kern.ndim > self.m:
                return kern.axes[-1].size
        return None

    def array(self, idx: tuple[int, ...]) -> np.ndarray:
        return self.kernels[idx].values


@dataclass(frozen=True)
class NormSpec:
    """A mixed-norm tree.

    The innermost node is evaluated first: each node computes
    ``(sum over its axes of weight * child**exponent) ** (1/exponent)``, the
    leaf below the innermost node being the absolute value. ``exponent`` may be
    ``math.inf`` (maximum over atoms), which only dual specs use.
    """

    exponent: float
    axes: tuple[int, ...]
    inner: NormSpec | None = None

    def nodes(self) -> list[NormSpec]:
        """Nodes from innermost to outermost."""
        out: list[NormSpec] = []
        node: NormSpec | None = self
        while node is not None:
            out.append(node)
            node = node.inner
        return out[::-1]

    def all_axes(self) -> tuple[int, ...]:
        return tuple(ax for node in self.nodes() for ax in node.axes)

    def describe(self) -> str:
        parts = []
        for node in reversed(self.nodes()):
            exp = "inf" if math.isinf(node.exponent) else f"{node.exponent:g}"
            parts.append(f"L{exp}{list(node.axes)}")
        return "(".join(parts) + ")" * (len(parts) - 1)


@dataclass(frozen=True)
class Couple:
    """A compatible couple ``(X0, X1)`` of mixed norms over the same axes."""

    spec0: NormSpec
    spec1: NormSpec

    def __post_init__(self) -> None:
        if sorted(self.spec0.all_axes()) != sorted(self.spec1.all_axes()):
            raise BadSpecError("couple specs must cover the same axes")
        for node in self.spec0.nodes() + self.spec1.nodes():
            if not 1.0 <= node.exponent < math.inf:
                raise BadSpecError("couple exponents must lie in [1, inf)")


@dataclass
class KResult:
    """Outcome of a K-functional evaluation.

    Attributes:
        value: ``norm0(part0) + t * norm1(part1)``, an upper bound for ``K``.
        part0: Component measured in ``X0``.
        part1: Component measured in ``X1``, ``part0 + part1 == f``.
        gap: ``value - dual`` where ``dual`` is a certified lower bound;
            ``inf`` when the iteration cap was hit.
        dual: Best dual certificate value.
        iterations: Solver iterations spent.
    """

    value: float
    part0: TensorField
    part1: TensorField
    gap: float
    dual: float
    iterations: int


@dataclass
class WeightFamily:
    """``[0,1]``-valued weights indexed by arbitrary keys (usually ``(i, j)``)."""

    weights: dict[Any, TensorField]

    def __post_init__(self) -> None:
        for key, wf in self.weights.items():
            if np.any(wf.values < 0.0) or np.any(wf.values > 1.0):
                raise BadSpecError(f"weight {key} leaves [0,1]")

    @property
    def binary(self) -> bool:
        return all(np.all((wf.values == 0.0) | (wf.values == 1.0)) for wf in self.weights.values())


@dataclass
class Decomposition:
    """Named parts summing to a target field on a coproduct space.

    Attributes:
        target: The decomposed field.
        parts: Part name to field, same axes as ``target``.
        inner: Part name to the 1-based slots measured in ``L^p`` (the rest
            are measured in the outer norm).
        specs: Part name to the certificate norm spec.
        certificates: Part name to the certificate value.
        disjoint: True when at most one part is nonzero at every point.
        lhs: Left-hand side the certificates are compared against.
        provenance: Part name to the pipeline stage that produced it.
        meta: Free-form numbers recorded by the pipeline.
    """

    target: TensorField
    parts: dict[str, TensorField]
    inner: dict[str, tuple[int, ...]]
    specs: dict[str, NormSpec]
    certificates: dict[str, float]
    disjoint: bool
    lhs: float
    provenance: dict[str, str] = field(default_factory=dict)
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def certificate_sum(self) -> float:
        return math.fsum(self.certificates.values())


@dataclass
class CheckReport:
    """One evaluated check instance."""

    check: str
    lhs: float
    rhs: float
    constant: float
    ratio: float
    passed: bool | None
    asserted: bool
    params: dict[str, Any] = field(default_factory=dict)
    seed: int | None = None
    instance: int | None = None
    error: str | None = None
    runtime_ms: float | None = None


@dataclass
class CheckEntry:
    """Registry entry describing a check plugin."""

    check_id: str
    check_module: str
    description: str
    asserted: bool
    variant: str | None = None


@dataclass
class Registry:
    checks: list[CheckEntry]

    def get(self, check_id: str) -> CheckEntry | None:
        return next((c for c in self.checks if c.check_id == check_id), None)


@dataclass
class ExperimentResult:
    reports: list[CheckReport]
    outputs: list[Path]
    exit_status: int
