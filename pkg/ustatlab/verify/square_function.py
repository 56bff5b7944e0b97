"""Square-function comparisons for fields of bounded Hoeffding level."""

from __future__ import annotations

import math

import numpy as np

from ustatlab.core_models import CheckReport, TensorField
from ustatlab.hoeffding import coordinates, hoeffding_decompose, level_projector
from ustatlab.norms import HIGHER_LEVEL_TOL, decoupled_square_moment, lp, mixed, norm, square_function
from ustatlab.pyd_models.config import ExperimentConfig
from ustatlab.spaces import hilbert_axis
from ustatlab.utils.errors import BadInstanceError

from .common import Instance, base_space, jitter, ratio_adverse, safe_ratio, sample_weights

EXACT_TOL = 1e-9


def _lp_norm(f: TensorField, p: float) -> float:
    _, n = coordinates(f)
    return norm(f, mixed(p, range(n), 2.0, range(n, f.ndim)))


def nonzero_components(f: TensorField) -> int:
    scale = max(1.0, float(np.abs(f.values).max(initial=0.0)))
    comps = hoeffding_decompose(f).values()
    return sum(1 for comp in comps if np.abs(comp.values).max(initial=0.0) > HIGHER_LEVEL_TOL * scale)


def check_square_function(f: TensorField, p: float, max_level: int) -> CheckReport:
    """``||f||_p / ||S_M f||_p``; asserted equal to 1 where it is an identity.

    The identity cases are ``M = 0``, ``p = 2`` and fields with a single
    nonzero Hoeffding component.

    Raises:
        HigherLevelsPresentError: ``f`` has components above level ``M``.
    """
    if not p > 0.0:
        raise BadInstanceError(f"need p > 0, got {p!r}")
    _, n = coordinates(f)
    s = square_function(f, max_level)
    lhs = _lp_norm(f, p)
    rhs = norm(s, lp(p, range(n)))
    ratio = safe_ratio(lhs, rhs)
    components = nonzero_components(f)
    exact = max_level == 0 or p == 2.0 or components <= 1
    passed = abs(ratio - 1.0) <= EXACT_TOL if exact else 0.0 < ratio < math.inf or lhs == rhs == 0.0
    return CheckReport(
        check="square_function",
        lhs=lhs,
        rhs=rhs,
        constant=1.0,
        ratio=ratio,
        passed=passed,
        asserted=exact,
        params={"n": n, "omega": f.axes[0].size, "p": p, "level": max_level, "components": components},
    )


def check_sqfn_decoupled(f: TensorField, p: float, max_level: int) -> CheckReport:
    """``||f||_p^p`` over the decoupled square moment ``sum_m E(sum_i f_i(...)^2)^(p/2)``; measured."""
    _, n = coordinates(f)
    square_function(f, max_level)
    lhs = _lp_norm(f, p) ** p
    rhs = decoupled_square_moment(f, p, max_level)
    ratio = safe_ratio(lhs, rhs)
    return CheckReport(
        check="sqfn_decoupled",
        lhs=lhs,
        rhs=rhs,
        constant=1.0,
        ratio=ratio,
        passed=0.0 < ratio < math.inf or lhs == rhs == 0.0,
        asserted=False,
        params={"n": n, "omega": f.axes[0].size, "p": p, "level": max_level},
    )


def sample(rng: np.random.Generator, config: ExperimentConfig) -> Instance:
    weights = sample_weights(rng, config.omega, config.weights)
    shape = (config.omega,) * config.n + ((config.value_dim,) if config.value_dim else ())
    params = {
        "n": config.n,
        "omega": config.omega,
        "p": config.p,
        "level": min(config.level, config.n),
        "value_dim": config.value_dim,
        "weights": weights,
    }
    return Instance(params, {"f": rng.standard_normal(shape)})


def field_from(instance: Instance) -> TensorField:
    p = instance.params
    base = base_space(instance)
    tail = (hilbert_axis(p["value_dim"]),) if p.get("value_dim") else ()
    raw = TensorField((base,) * p["n"] + tail, instance.data["f"])
    return raw.with_values(level_projector(raw, p["level"])(raw.values))


def evaluate(instance: Instance, config: ExperimentConfig) -> CheckReport:
    f = field_from(instance)
    p = instance.params
    if config.variant == "decoupled":
        report = check_sqfn_decoupled(f, p["p"], p["level"])
    else:
        report = check_square_function(f, p["p"], p["level"])
    report.params = {**p, **report.params}
    return report


def perturb(instance: Instance, rng: np.random.Generator, scale: float) -> Instance:
    return instance.with_data(f=jitter(rng, instance.data["f"], scale))


def adverse(report: CheckReport) -> float:
    r = ratio_adverse(report)
    return abs(math.log(r)) if 0.0 < r < math.inf else -math.inf
