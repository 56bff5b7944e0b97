"""Marcinkiewicz-Zygmund comparison for sums of independent mean-zero vectors.

Both sides are computed by exact enumeration of ``Omega^n``; the
symmetrization step additionally enumerates all ``2^n`` sign patterns.
"""

from __future__ import annotations

import math
from itertools import product

import numpy as np

from ustatlab.core_models import CheckReport, KernelFamily, TensorField
from ustatlab.hoeffding import assemble_ustat
from ustatlab.norms import ustat_moment
from ustatlab.pyd_models.config import ExperimentConfig
from ustatlab.spaces import MAX_ELEMENTS, check_guard, hilbert_axis, make_space
from ustatlab.utils.errors import BadInstanceError, TooLargeError

from .common import Instance, base_space, jitter, mean_zero, ratio_adverse, safe_ratio, sample_weights

MAX_SUMMANDS = 12
MEAN_TOL = 1e-10
SYMMETRIZATION_TOL = 1e-12


def _moment(k: KernelFamily, p: float, max_elements: int) -> float:
    """``E ||sum_i X_i||^p`` with the euclidean norm on the value axis."""
    u = assemble_ustat(k, decoupled=False, max_elements=max_elements)
    vals = u.values
    if k.value_dim is not None:
        vals = np.sqrt((vals**2).sum(axis=-1))
    weight = np.ones(())
    for _ in range(k.n):
        weight = np.multiply.outer(weight, k.base.w)
    return math.fsum((weight * np.abs(vals) ** p).ravel())


def _signed(k: KernelFamily, signs: tuple[int, ...]) -> KernelFamily:
    kernels = {idx: kern.with_values(signs[idx[0] - 1] * kern.values) for idx, kern in k.kernels.items()}
    return KernelFamily(m=1, n=k.n, base=k.base, kernels=kernels, strict=True)


def khintchine_family(z: list[float]) -> KernelFamily:
    """``X_i = z_i r_i`` with ``r_i`` a uniform sign."""
    base = make_space([0.5, 0.5])
    kernels = {(i + 1,): TensorField((base,), np.array([-zi, zi])) for i, zi in enumerate(z)}
    return KernelFamily(m=1, n=len(z), base=base, kernels=kernels)


def check_mz(k: KernelFamily, p: float, max_elements: int = MAX_ELEMENTS) -> CheckReport:
    """``(E||sum X_i||^p)^(1/p)`` over ``(E(sum |X_i|^2)^(p/2))^(1/p)``, plus symmetrization.

    The symmetrization ratio ``(E||sum X_i||^p / E_r E||sum r_i X_i||^p)^(1/p)``
    must lie in ``[1/2, 2]``.

    Raises:
        BadInstanceError: ``p < 1``, arity other than 1, or a summand that is not mean zero.
        TooLargeError: more than 12 summands or the enumeration exceeds the guard.
    """
    if not p >= 1.0 or not math.isfinite(p):
        raise BadInstanceError(f"need 1 <= p < inf, got {p!r}")
    if k.m != 1:
        raise BadInstanceError("summands are one-variable kernels")
    if k.n > MAX_SUMMANDS:
        raise TooLargeError(k.n, MAX_SUMMANDS)
    check_guard(2**k.n * k.base.size**k.n * (k.value_dim or 1), max_elements)
    for idx, kern in k.kernels.items():
        scale = max(1.0, float(np.abs(kern.values).max(initial=0.0)))
        mean = np.tensordot(k.base.w, kern.values, axes=([0], [0]))
        if float(np.abs(mean).max(initial=0.0)) > MEAN_TOL * scale:
            raise BadInstanceError(f"X_{idx[0]} is not mean zero")

    moment = _moment(k, p, max_elements)
    lhs = moment ** (1.0 / p)
    rhs = ustat_moment(k, 2.0, p, mode="coupled", max_elements=max_elements).value ** (1.0 / p)
    signed = [_moment(_signed(k, signs), p, max_elements) for signs in product((1, -1), repeat=k.n)]
    sym_moment = math.fsum(signed) / len(signed)
    sym_ratio = safe_ratio(moment, sym_moment) ** (1.0 / p)
    sym_ok = 0.5 - SYMMETRIZATION_TOL <= sym_ratio <= 2.0 + SYMMETRIZATION_TOL
    ratio = safe_ratio(lhs, rhs)
    return CheckReport(
        check="mz",
        lhs=lhs,
        rhs=rhs,
        constant=1.0,
        ratio=ratio,
        passed=sym_ok and (0.0 < ratio < math.inf or lhs == rhs == 0.0),
        asserted=True,
        params={
            "n": k.n,
            "omega": k.base.size,
            "p": p,
            "value_dim": k.value_dim,
            "symmetrization_ratio": sym_ratio,
        },
    )


def sample(rng: np.random.Generator, config: ExperimentConfig) -> Instance:
    weights = sample_weights(rng, config.omega, config.weights)
    shape = (config.n, config.omega) + ((config.value_dim,) if config.value_dim else ())
    x = mean_zero(rng.standard_normal(shape), np.asarray(weights), (1,))
    params = {"n": config.n, "omega": config.omega, "p": config.p, "value_dim": config.value_dim, "weights": weights}
    return Instance(params, {"x": x})


def family_from(instance: Instance) -> KernelFamily:
    base = base_space(instance)
    x = instance.data["x"]
    tail = (hilbert_axis(x.shape[-1]),) if x.ndim > 2 else ()
    kernels = {(i + 1,): TensorField((base,) + tail, x[i]) for i in range(x.shape[0])}
    return KernelFamily(m=1, n=x.shape[0], base=base, kernels=kernels)


def evaluate(instance: Instance, config: ExperimentConfig) -> CheckReport:
    report = check_mz(family_from(instance), instance.params["p"])
    report.params = {**instance.params, **report.params}
    return report


def perturb(instance: Instance, rng: np.random.Generator, scale: float) -> Instance:
    w = np.asarray(instance.params["weights"])
    return instance.with_data(x=mean_zero(jitter(rng, instance.data["x"], scale), w, (1,)))


def adverse(report: CheckReport) -> float:
    r = ratio_adverse(report)
    return abs(math.log(r)) if 0.0 < r < math.inf else -math.inf
