"""Numerical identities for positively homogeneous norms.

``euler_check`` tests ``sum_k x_k d_k phi(x) = phi(x)``; ``duality_identity_check``
tests ``E||f||_X^q = <f, P_V(||f||_X^(q-1) grad||.||_X(f))>`` for ``f`` in the
range of ``P_V``. Gradients are central differences with ``h = 1e-5`` times
the sup norm of the point; the gradient is 0 at points where ``f`` vanishes.
"""

from __future__ import annotations

import math

import numpy as np

from ustatlab.core_models import CheckReport, NormSpec, Projector, TensorField
from ustatlab.hoeffding import level_projector, support_projector
from ustatlab.norms import evaluate as evaluate_spec
from ustatlab.norms import lp, mixed, norm, validate_spec
from ustatlab.pyd_models.config import ExperimentConfig
from ustatlab.spaces import counting, hilbert_axis, make_space
from ustatlab.utils.errors import BadInstanceError, BadSpecError, UndefinedError

from .common import Instance, base_space, jitter, sample_weights

STEP = 1e-5
EULER_TOL = 1e-6
DUALITY_TOL = 1e-5
EXPONENTS = (1.0, 1.5, 2.0, 3.0)


def euler_check(spec: NormSpec, x: TensorField) -> float:
    """Relative residual ``|sum_k x_k d_k phi(x) - phi(x)| / phi(x)``.

    Raises:
        UndefinedError: ``x = 0``.
    """
    validate_spec(spec, x.ndim)
    top = float(np.abs(x.values).max(initial=0.0))
    if top == 0.0:
        raise UndefinedError("the Euler identity is not defined at 0")
    h = STEP * top
    size = x.size
    flat = x.values.ravel()
    steps = h * np.eye(size)
    axes_w = [ax.w for ax in x.axes] + [np.ones(size)]

    def batch(moved: np.ndarray) -> np.ndarray:
        return evaluate_spec(moved.reshape(x.values.shape + (size,)), axes_w, spec).reshape(-1)

    grad = (batch(flat[:, None] + steps) - batch(flat[:, None] - steps)) / (2.0 * h)
    phi = norm(x, spec)
    return abs(math.fsum(flat * grad) - phi) / phi


def _shift(spec: NormSpec, offset: int) -> NormSpec:
    inner = None if spec.inner is None else _shift(spec.inner, offset)
    return NormSpec(spec.exponent, tuple(ax + offset for ax in spec.axes), inner)


def duality_identity_check(f: TensorField, q: float, x_spec: NormSpec, projector: Projector | None = None) -> float:
    """Relative residual of the duality identity.

    ``x_spec`` is a norm on the value axes, numbered from 0; ``projector``
    defaults to the identity (``V`` the whole space).

    Raises:
        BadSpecError: ``q <= 1`` or ``x_spec`` not covering the value axes.
        BadInstanceError: ``f`` outside the range of ``projector``.
        UndefinedError: ``f = 0``.
    """
    if not q > 1.0 or not math.isfinite(q):
        raise BadSpecError(f"need 1 < q < inf, got {q!r}")
    coords, values = f.coordinate_axes, f.value_axes
    if not values or coords != tuple(range(len(coords))):
        raise BadSpecError("f needs trailing value axes")
    validate_spec(x_spec, len(values))
    top = float(np.abs(f.values).max(initial=0.0))
    if top == 0.0:
        raise UndefinedError("the duality identity is not defined at f = 0")
    project = projector if projector is not None else (lambda v: np.array(v, dtype=float))
    if float(np.abs(project(f.values) - f.values).max()) > 1e-9 * top:
        raise BadInstanceError("f is not in the range of the projector")

    spec = _shift(x_spec, len(coords))
    axes_w = [ax.w for ax in f.axes]
    pointwise = evaluate_spec(f.values, axes_w, spec)
    value_axes = tuple(values)
    h = STEP * np.abs(f.values).max(axis=value_axes, keepdims=True)
    safe_h = np.where(h > 0.0, h, 1.0)
    grad = np.zeros_like(f.values)
    for v in np.ndindex(*(f.values.shape[ax] for ax in value_axes)):
        bump = np.zeros(tuple(f.values.shape[ax] for ax in value_axes))
        bump[v] = 1.0
        step = safe_h * bump
        diff = evaluate_spec(f.values + step, axes_w, spec) - evaluate_spec(f.values - step, axes_w, spec)
        grad[(...,) + v] = (np.where(h > 0.0, diff / (2.0 * safe_h), 0.0))[(...,) + (0,) * len(value_axes)]
    g = pointwise ** (q - 1.0) * grad

    weight = np.ones(())
    for ax in coords:
        weight = np.multiply.outer(weight, f.axes[ax].w)
    weight = weight.reshape(weight.shape + (1,) * len(value_axes))
    lhs = math.fsum((weight * pointwise**q).ravel())
    pairing = math.fsum((weight * f.values * project(g)).ravel())
    return abs(lhs - pairing) / lhs


def sample(rng: np.random.Generator, config: ExperimentConfig) -> Instance:
    weights = sample_weights(rng, config.omega, config.weights)
    if config.variant == "duality":
        dim = config.value_dim or 2
        shape = (config.omega,) * config.n + (dim,)
        mask = (rng.random((config.omega,) * config.n) < 0.7).astype(float)
        params = {
            "n": config.n,
            "omega": config.omega,
            "q": config.q if config.q > 1.0 else 2.0,
            "x_exponent": float(rng.choice(EXPONENTS[1:])),
            "subspace": "level" if rng.random() < 0.5 else "support",
            "level": min(config.level, config.n),
            "weights": weights,
        }
        return Instance(params, {"f": rng.standard_normal(shape), "mask": mask})
    outer, inner = (float(e) for e in rng.choice(EXPONENTS, size=2))
    shape = (config.omega, config.j)
    signs = np.where(rng.random(shape) < 0.5, -1.0, 1.0)
    params = {"omega": config.omega, "j": config.j, "outer": outer, "inner": inner, "weights": weights}
    return Instance(params, {"x": signs * rng.uniform(0.2, 1.0, shape)})


def _duality_inputs(instance: Instance) -> tuple[TensorField, Projector]:
    p = instance.params
    base = base_space(instance)
    raw = TensorField((base,) * p["n"] + (hilbert_axis(instance.data["f"].shape[-1]),), instance.data["f"])
    if p["subspace"] == "level":
        project = level_projector(raw, p["level"])
    else:
        keep = instance.data["mask"].astype(bool)[..., None]
        project = support_projector(np.broadcast_to(keep, raw.values.shape))
    return raw.with_values(project(raw.values)), project


def evaluate(instance: Instance, config: ExperimentConfig) -> CheckReport:
    p = instance.params
    if config.variant == "duality":
        f, project = _duality_inputs(instance)
        residual = duality_identity_check(f, p["q"], lp(p["x_exponent"], (0,)), project)
        check, tol = "duality", DUALITY_TOL
    else:
        axes = (make_space(p["weights"]), counting(p["j"]))
        x = TensorField(axes, instance.data["x"])
        residual = euler_check(mixed(p["outer"], (0,), p["inner"], (1,)), x)
        check, tol = "euler", EULER_TOL
    return CheckReport(
        check=check,
        lhs=residual,
        rhs=tol,
        constant=1.0,
        ratio=residual / tol,
        passed=residual <= tol,
        asserted=True,
        params=dict(p),
    )


def perturb(instance: Instance, rng: np.random.Generator, scale: float) -> Instance:
    if "f" in instance.data:
        return instance.with_data(f=jitter(rng, instance.data["f"], scale))
    x = instance.data["x"]
    moved = jitter(rng, x, scale)
    return instance.with_data(x=np.where(np.abs(moved) < 0.05, np.sign(x) * 0.05, moved))


def adverse(report: CheckReport) -> float:
    return -math.inf if report.error is not None else report.ratio
