"""Constant-one directions of the decomposition theorems.

Every pipeline output must reconstruct its target, have disjoint supports,
and carry certificates whose sum is at least the left-hand side and at most
``cap`` times it; each single certificate norm of the undivided family must
also dominate the left-hand side.
"""

from __future__ import annotations

import math

import numpy as np

from ustatlab.core_models import CheckReport, Decomposition, TensorField
from ustatlab.decomp import (
    DEFAULT_CAPS,
    RECONSTRUCTION_TOL,
    check_disjoint,
    check_reconstruction,
    four_summand,
    js_decompose,
    multilevel_decompose,
)
from ustatlab.norms import norm
from ustatlab.pyd_models.config import ExperimentConfig
from ustatlab.utils.errors import BadCheckError

from .common import (
    Instance,
    at_least,
    base_space,
    family_from_arrays,
    index_tuples,
    jitter,
    nonneg,
    safe_ratio,
    sample_weights,
)

PIPELINES = ("js", "four-summand", "multilevel")
CHECK_NAMES = {"js": "trivial_direction_js", "four-summand": "trivial_direction_4sum", "multilevel": "trivial_direction_2m"}
PHI_TOL = 1e-9


def check_trivial_direction(d: Decomposition, cap: float, name: str = "trivial_direction") -> CheckReport:
    """Sandwich ``lhs <= sum of certificates <= cap * lhs`` plus exactness checks."""
    scale = max(1.0, float(np.abs(d.target.values).max(initial=0.0)))
    residual = check_reconstruction(d)
    reconstructs = residual <= RECONSTRUCTION_TOL * scale
    disjoint = d.disjoint and check_disjoint(d)
    total = d.certificate_sum
    lower = at_least(total, d.lhs)
    upper = total <= cap * d.lhs * (1.0 + 1e-12) or total == 0.0
    family_norms = {part: norm(d.target, spec) for part, spec in d.specs.items()}
    dominated = all(at_least(v, d.lhs) for v in family_norms.values())
    phi_ok = True
    if "phi_integral" in d.meta:
        phi_ok = d.meta["phi_integral"] <= d.meta["phi_constant"] * (1.0 + PHI_TOL)
    return CheckReport(
        check=name,
        lhs=d.lhs,
        rhs=total,
        constant=1.0,
        ratio=safe_ratio(total, d.lhs),
        passed=reconstructs and disjoint and lower and upper and dominated and phi_ok,
        asserted=True,
        params={
            "reconstruction_error": residual,
            "disjoint": disjoint,
            "cap": cap,
            "certificates": dict(d.certificates),
            "min_family_norm": min(family_norms.values(), default=math.inf),
            "phi_integral": d.meta.get("phi_integral"),
        },
    )


def run_pipeline(pipeline: str, instance: Instance) -> Decomposition:
    p = instance.params
    base = base_space(instance)
    arrays = instance.data["kernels"]
    if pipeline == "js":
        return js_decompose([TensorField((base,), row) for row in arrays], p["p"])
    k = family_from_arrays(base, p["n"], p["m"], arrays, strict=False)
    if pipeline == "four-summand":
        return four_summand(k, p["p"])
    if pipeline == "multilevel":
        return multilevel_decompose(k, p["p"])
    raise BadCheckError(f"unknown pipeline {pipeline!r}; expected one of {', '.join(PIPELINES)}")


def _arity(pipeline: str, config: ExperimentConfig) -> int:
    return {"js": 1, "four-summand": 2}.get(pipeline, config.m)


def sample(rng: np.random.Generator, config: ExperimentConfig) -> Instance:
    pipeline = config.variant or "multilevel"
    m = _arity(pipeline, config)
    weights = sample_weights(rng, config.omega, config.weights)
    count = len(index_tuples(config.n, m, strict=False))
    arrays = nonneg(rng, (count,) + (config.omega,) * m)
    params = {"pipeline": pipeline, "n": config.n, "m": m, "omega": config.omega, "p": config.p, "weights": weights}
    return Instance(params, {"kernels": arrays})


def evaluate(instance: Instance, config: ExperimentConfig) -> CheckReport:
    p = instance.params
    d = run_pipeline(p["pipeline"], instance)
    cap = config.cap or float(d.meta.get("cap", DEFAULT_CAPS[1]))
    report = check_trivial_direction(d, cap, CHECK_NAMES[p["pipeline"]])
    report.params = {**p, **report.params}
    return report


def perturb(instance: Instance, rng: np.random.Generator, scale: float) -> Instance:
    return instance.with_data(kernels=jitter(rng, instance.data["kernels"], scale, lower=0.0))


def adverse(report: CheckReport) -> float:
    """Certificate ratio relative to the cap; above 1 breaks the upper end."""
    if report.error is not None or not math.isfinite(report.ratio):
        return -math.inf
    return report.ratio / report.params.get("cap", 1.0)
