"""Coupled versus decoupled moments of nonnegative U-statistics."""

from __future__ import annotations

import math

import numpy as np

from ustatlab.core_models import CheckReport, KernelFamily, TensorField
from ustatlab.norms import ustat_moment
from ustatlab.pyd_models.config import ExperimentConfig
from ustatlab.spaces import MAX_ELEMENTS
from ustatlab.utils.errors import BadInstanceError

from .common import (
    Instance,
    base_space,
    family_from_arrays,
    index_tuples,
    jitter,
    nonneg,
    ratio_adverse,
    safe_ratio,
    sample_weights,
)

INVARIANCE_TOL = 1e-10


def reverse_labels(k: KernelFamily) -> KernelFamily:
    """Relabel coordinates ``i -> n + 1 - i``; tuples stay increasing, kernel variables are reversed."""
    kernels = {}
    for idx, kern in k.kernels.items():
        new = tuple(k.n + 1 - i for i in reversed(idx))
        order = tuple(reversed(range(k.m))) + tuple(range(k.m, kern.ndim))
        kernels[new] = TensorField(kern.axes, np.transpose(kern.values, order))
    return KernelFamily(m=k.m, n=k.n, base=k.base, kernels=kernels, strict=k.strict)


def equal_weight_rotation(weights: tuple[float, ...]) -> np.ndarray:
    """A permutation moving atoms cyclically inside every class of equal weight."""
    perm = np.arange(len(weights))
    classes: dict[float, list[int]] = {}
    for a, wt in enumerate(weights):
        classes.setdefault(wt, []).append(a)
    for members in classes.values():
        perm[members] = np.roll(members, 1)
    return perm


def permute_family(k: KernelFamily, perm: np.ndarray) -> KernelFamily:
    kernels = {}
    for idx, kern in k.kernels.items():
        vals = kern.values
        for ax in range(k.m):
            vals = np.take(vals, perm, axis=ax)
        kernels[idx] = TensorField(kern.axes, vals)
    return KernelFamily(m=k.m, n=k.n, base=k.base, kernels=kernels, strict=k.strict)


def moment_ratio(k: KernelFamily, q: float, max_elements: int = MAX_ELEMENTS) -> tuple[float, float]:
    """``E(sum_i f_i)^q`` coupled and decoupled."""
    coupled = ustat_moment(k, 1.0, q, mode="coupled", check_sign=True, max_elements=max_elements).value
    decoupled = ustat_moment(k, 1.0, q, mode="decoupled", check_sign=True, max_elements=max_elements).value
    return coupled, decoupled


def check_decoupling(k: KernelFamily, q: float, max_elements: int = MAX_ELEMENTS) -> CheckReport:
    """Coupled over decoupled ``q``-th moment, with invariance under relabeling.

    Raises:
        BadInstanceError: ``q`` outside ``(0, 1]`` or a non-strict family.
        NotNonnegativeError: a kernel takes a negative value.
        TooLargeError: the decoupled enumeration exceeds the guard.
    """
    if not 0.0 < q <= 1.0:
        raise BadInstanceError(f"need 0 < q <= 1, got {q!r}")
    if not k.strict:
        raise BadInstanceError("decoupling compares U-statistics, the family must be strict")
    coupled, decoupled = moment_ratio(k, q, max_elements)
    ratio = safe_ratio(coupled, decoupled)
    relabeled = safe_ratio(*moment_ratio(reverse_labels(k), q, max_elements))
    permuted = safe_ratio(*moment_ratio(permute_family(k, equal_weight_rotation(k.base.weights)), q, max_elements))
    drift = max(abs(relabeled - ratio), abs(permuted - ratio))
    passed = 0.0 < ratio < math.inf and drift <= INVARIANCE_TOL * ratio
    return CheckReport(
        check="decoupling",
        lhs=coupled,
        rhs=decoupled,
        constant=1.0,
        ratio=ratio,
        passed=passed,
        asserted=True,
        params={"n": k.n, "m": k.m, "omega": k.base.size, "q": q, "kernels": len(k.kernels), "invariance_drift": drift},
    )


def sample(rng: np.random.Generator, config: ExperimentConfig) -> Instance:
    count = len(index_tuples(config.n, config.m, strict=True))
    weights = sample_weights(rng, config.omega, config.weights)
    arrays = nonneg(rng, (count,) + (config.omega,) * config.m)
    params = {"n": config.n, "m": config.m, "omega": config.omega, "q": config.q, "weights": weights}
    return Instance(params, {"kernels": arrays})


def evaluate(instance: Instance, config: ExperimentConfig) -> CheckReport:
    p = instance.params
    k = family_from_arrays(base_space(instance), p["n"], p["m"], instance.data["kernels"], strict=True)
    report = check_decoupling(k, p["q"])
    report.params = {**p, **report.params}
    return report


def perturb(instance: Instance, rng: np.random.Generator, scale: float) -> Instance:
    return instance.with_data(kernels=jitter(rng, instance.data["kernels"], scale, lower=0.0))


def adverse(report: CheckReport) -> float:
    """Distance of the ratio from 1 on a log scale, so both tails are searched."""
    r = ratio_adverse(report)
    return abs(math.log(r)) if 0.0 < r < math.inf else -math.inf
