"""Certificates of the mean-zero decomposition against ``||sum_i f_i||_p``; measured."""

from __future__ import annotations

import math

import numpy as np

from ustatlab.core_models import CheckReport, KernelFamily
from ustatlab.decomp import RECONSTRUCTION_TOL, canonical_decompose, check_reconstruction
from ustatlab.pyd_models.config import ExperimentConfig
from ustatlab.spaces import MAX_ELEMENTS

from .common import (
    Instance,
    base_space,
    family_from_arrays,
    index_tuples,
    jitter,
    mean_zero,
    ratio_adverse,
    safe_ratio,
    sample_weights,
)


def check_canonical(k: KernelFamily, p: float, max_elements: int = MAX_ELEMENTS) -> CheckReport:
    d = canonical_decompose(k, p, max_elements=max_elements)
    scale = max(1.0, float(np.abs(d.target.values).max(initial=0.0)))
    residual = check_reconstruction(d)
    ratio = safe_ratio(d.certificate_sum, d.lhs)
    return CheckReport(
        check="canonical",
        lhs=d.lhs,
        rhs=d.certificate_sum,
        constant=1.0,
        ratio=ratio,
        passed=residual <= RECONSTRUCTION_TOL * scale and (0.0 < ratio < math.inf or d.lhs == 0.0),
        asserted=False,
        params={
            "n": k.n,
            "m": k.m,
            "omega": k.base.size,
            "p": p,
            "certificates": dict(d.certificates),
            "reconstruction_error": residual,
        },
    )


def sample(rng: np.random.Generator, config: ExperimentConfig) -> Instance:
    m = min(config.m, config.n)
    weights = sample_weights(rng, config.omega, config.weights)
    count = len(index_tuples(config.n, m, strict=True))
    raw = rng.standard_normal((count,) + (config.omega,) * m)
    arrays = mean_zero(raw, np.asarray(weights), range(1, m + 1))
    params = {"n": config.n, "m": m, "omega": config.omega, "p": min(max(config.p, 1.0), 2.0), "weights": weights}
    return Instance(params, {"kernels": arrays})


def evaluate(instance: Instance, config: ExperimentConfig) -> CheckReport:
    p = instance.params
    k = family_from_arrays(base_space(instance), p["n"], p["m"], instance.data["kernels"], strict=True)
    report = check_canonical(k, p["p"])
    report.params = {**p, **report.params}
    return report


def perturb(instance: Instance, rng: np.random.Generator, scale: float) -> Instance:
    w = np.asarray(instance.params["weights"])
    moved = jitter(rng, instance.data["kernels"], scale)
    return instance.with_data(kernels=mean_zero(moved, w, range(1, instance.params["m"] + 1)))


def adverse(report: CheckReport) -> float:
    return ratio_adverse(report)
