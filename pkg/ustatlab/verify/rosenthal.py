"""Lower half of Rosenthal's inequality for nonnegative summands.

``(E (sum X_i)^p)^(1/p) >= max(sum ||X_i||_1, (sum ||X_i||_p^p)^(1/p))`` holds
with constant 1; the observed ratio shows how far the upper half's constant
is from 1 on the instance.
"""

from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np

from ustatlab.core_models import CheckReport, KernelFamily, TensorField
from ustatlab.norms import Method, lp, norm, ustat_moment
from ustatlab.pyd_models.config import ExperimentConfig
from ustatlab.spaces import MAX_ELEMENTS
from ustatlab.utils.errors import BadInstanceError

from .common import Instance, at_least, base_space, jitter, lower_bound_adverse, nonneg, safe_ratio, sample_weights


def check_rosenthal(
    fields: Sequence[TensorField],
    p: float,
    method: Method = "exact",
    samples: int = 100_000,
    seed: int = 0,
    max_elements: int = MAX_ELEMENTS,
) -> CheckReport:
    """Comparison of ``||sum X_i||_p`` with the Rosenthal maximum.

    With ``method="mc"`` the moment is estimated and the lower bound is
    accepted within three standard errors.

    Raises:
        BadInstanceError: ``p < 1`` or the fields do not share one probability space.
        NotNonnegativeError: some ``X_i`` takes a negative value.
        TooLargeError: ``|Omega|^n`` exceeds the guard.
    """
    if not p >= 1.0 or not math.isfinite(p):
        raise BadInstanceError(f"need 1 <= p < inf, got {p!r}")
    if not fields:
        raise BadInstanceError("empty family")
    base = fields[0].axes[0]
    if any(f.axes != (base,) for f in fields):
        raise BadInstanceError("summands must be functions on one probability space")
    k = KernelFamily(m=1, n=len(fields), base=base, kernels={(i + 1,): f for i, f in enumerate(fields)})
    est = ustat_moment(
        k, 1.0, p, mode="coupled", method=method, samples=samples, seed=seed, check_sign=True, max_elements=max_elements
    )
    lhs = est.value ** (1.0 / p)
    l1 = math.fsum(norm(f, lp(1.0, (0,))) for f in fields)
    lpp = math.fsum(norm(f, lp(p, (0,))) ** p for f in fields) ** (1.0 / p)
    rhs = max(l1, lpp)
    return CheckReport(
        check="rosenthal",
        lhs=lhs,
        rhs=rhs,
        constant=1.0,
        ratio=safe_ratio(lhs, rhs),
        passed=at_least(lhs, rhs) or at_least(est.value + 3.0 * est.stderr, rhs**p),
        asserted=True,
        params={
            "n": len(fields),
            "omega": base.size,
            "p": p,
            "l1_sum": l1,
            "lp_sum": lpp,
            "method": method,
            "stderr": est.stderr,
        },
    )


def sample(rng: np.random.Generator, config: ExperimentConfig) -> Instance:
    weights = sample_weights(rng, config.omega, config.weights)
    mc_seed = int(rng.integers(2**32))
    params = {"n": config.n, "omega": config.omega, "p": config.p, "weights": weights, "mc_seed": mc_seed}
    return Instance(params, {"x": nonneg(rng, (config.n, config.omega))})


def evaluate(instance: Instance, config: ExperimentConfig) -> CheckReport:
    base = base_space(instance)
    fields = [TensorField((base,), row) for row in instance.data["x"]]
    p = instance.params
    report = check_rosenthal(fields, p["p"], config.method, config.mc_samples, p["mc_seed"])
    report.params = {**instance.params, **report.params}
    return report


def perturb(instance: Instance, rng: np.random.Generator, scale: float) -> Instance:
    return instance.with_data(x=jitter(rng, instance.data["x"], scale, lower=0.0))


def adverse(report: CheckReport) -> float:
    return lower_bound_adverse(report)
