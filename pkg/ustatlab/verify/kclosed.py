"""K-functional restricted to ``V_{<=M}`` against the unrestricted one."""

from __future__ import annotations

import math

import numpy as np

from ustatlab.core_models import CheckReport, Couple, TensorField
from ustatlab.hoeffding import coordinates, level_projector
from ustatlab.interp import DEFAULT_SETTINGS, SolverSettings, k_functional
from ustatlab.norms import parse_couple
from ustatlab.pyd_models.config import ExperimentConfig

from .common import Instance, base_space, jitter, ratio_adverse, safe_ratio, sample_weights

RATIO_TOL = 1e-9


def check_kclosed(
    f: TensorField, t: float, c: Couple, max_level: int, settings: SolverSettings = DEFAULT_SETTINGS
) -> CheckReport:
    """Constrained over unconstrained ``K(f, t)``.

    The ratio is taken against the smaller of the two values found, so it is
    at least 1; the check also requires the constrained value to respect the
    unconstrained dual certificate.
    """
    _, n = coordinates(f)
    project = level_projector(f, max_level)
    inside = k_functional(f, t, c, constraint=project, settings=settings)
    outside = k_functional(f, t, c, settings=settings)
    ratio = safe_ratio(inside.value, min(outside.value, inside.value))
    passed = ratio >= 1.0 - RATIO_TOL and inside.value >= outside.dual * (1.0 - RATIO_TOL)
    return CheckReport(
        check="kclosed",
        lhs=inside.value,
        rhs=outside.value,
        constant=1.0,
        ratio=ratio,
        passed=passed,
        asserted=True,
        params={"n": n, "level": max_level, "t": t, "gap_inside": inside.gap, "gap_outside": outside.gap},
    )


def sample(rng: np.random.Generator, config: ExperimentConfig) -> Instance:
    weights = sample_weights(rng, config.omega, config.weights)
    params = {
        "n": config.n,
        "omega": config.omega,
        "level": min(config.level, config.n),
        "t": config.t,
        "couple": config.couple,
        "weights": weights,
    }
    return Instance(params, {"f": rng.standard_normal((config.omega,) * config.n)})


def field_from(instance: Instance) -> TensorField:
    p = instance.params
    raw = TensorField((base_space(instance),) * p["n"], instance.data["f"])
    return raw.with_values(level_projector(raw, p["level"])(raw.values))


def evaluate(instance: Instance, config: ExperimentConfig) -> CheckReport:
    p = instance.params
    f = field_from(instance)
    report = check_kclosed(f, p["t"], parse_couple(p["couple"], f.ndim), p["level"], config.solver_settings())
    report.params = {**p, **report.params}
    return report


def perturb(instance: Instance, rng: np.random.Generator, scale: float) -> Instance:
    return instance.with_data(f=jitter(rng, instance.data["f"], scale))


def adverse(report: CheckReport) -> float:
    r = ratio_adverse(report)
    return r if math.isfinite(r) else -math.inf
