"""Weighted lower bound for sums over independent blocks.

For ``f_ij`` depending on the ``i``-th coordinate only and weights
``w_ij in [0,1]`` depending on all coordinates,

    E (sum_ij |(w_ij v eps) f_ij|^p)^(1/p) >= C * K(F, 1; L^1(l^p(J)), L^p(l^p(J)))

where ``F`` lives on ``n`` disjoint copies of ``Omega``, block ``i`` holding
``(1{E_i(w_ij v eps) >= kappa} f_ij)_j``. ``C = kappa^p 2^(-1/p')`` in
general and ``(kappa - eps)^(2 - 1/p) 2^(-1/p')`` for binary weights.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Mapping

import numpy as np

from ustatlab.core_models import CheckReport, Couple, TensorField, WeightFamily
from ustatlab.decomp import threshold_weights
from ustatlab.hoeffding import cond_expect, coordinates
from ustatlab.interp import DEFAULT_SETTINGS, SolverSettings, k_functional
from ustatlab.norms import mixed
from ustatlab.pyd_models.config import ExperimentConfig
from ustatlab.spaces import coproduct_axis, counting
from ustatlab.utils.errors import BadInstanceError

from .common import Instance, base_space, flip, jitter, nonneg, safe_ratio, sample_weights

HYPOTHESIS_TOL = 1e-12
VIOLATION_TOL = 1e-8

logger = logging.getLogger(__name__)


def weighted_constant(p: float, kappa: float, eps: float, binary: bool) -> float:
    inv_conj = 1.0 - 1.0 / p
    if binary:
        return (kappa - eps) ** (2.0 - 1.0 / p) * 2.0 ** (-inv_conj)
    return kappa**p * 2.0 ** (-inv_conj)


def _block_function(values: np.ndarray, i: int) -> np.ndarray:
    """Restriction of an array depending on coordinate ``i`` only to that coordinate."""
    moved = np.moveaxis(values, i - 1, 0)
    return moved.reshape(moved.shape[0], -1)[:, 0]


def check_weighted_lower_bound(
    f: Mapping[tuple[int, int], TensorField],
    w: WeightFamily,
    p: float,
    kappa: float,
    eps: float = 0.0,
    settings: SolverSettings = DEFAULT_SETTINGS,
) -> CheckReport:
    """Compare both sides of the weighted lower bound.

    Also asserts the bound against ``E (sum_ij (A_ij f_ij)^p)^(1/p)``, which
    never exceeds the interpolation right-hand side.

    The main bound is checked against the solver's dual certificate, a lower
    bound for ``K`` whether or not the solver converged.

    Raises:
        BadInstanceError: ``p < 1``, a missing weight, or ``f_ij`` depending
            on coordinates other than ``i``.
        BadThresholdError: ``kappa`` not in ``(eps, 1]``.
    """
    if not p >= 1.0 or not math.isfinite(p):
        raise BadInstanceError(f"need 1 <= p < inf, got {p!r}")
    if not f:
        raise BadInstanceError("empty family")
    first = next(iter(f.values()))
    base, n_blocks = coordinates(first)
    js = sorted({j for _, j in f})
    for (i, j), fij in f.items():
        if (i, j) not in w.weights:
            raise BadInstanceError(f"no weight for ({i}, {j})")
        if fij.axes != first.axes or w.weights[(i, j)].axes != first.axes:
            raise BadInstanceError("all functions and weights must live on Omega^n")
        if not 1 <= i <= n_blocks:
            raise BadInstanceError(f"block {i} outside [1,{n_blocks}]")
        scale = max(1.0, float(np.abs(fij.values).max(initial=0.0)))
        if float(np.abs(cond_expect(fij, (i,)).values - fij.values).max()) > HYPOTHESIS_TOL * scale:
            raise BadInstanceError(f"f_{i},{j} depends on coordinates other than {i}")

    binary = w.binary
    floored = {key: np.maximum(w.weights[key].values, eps) for key in f}
    total = sum((np.abs(floored[key] * fij.values) ** p for key, fij in f.items()), np.zeros(first.values.shape))
    weight = np.ones(())
    for _ in range(n_blocks):
        weight = np.multiply.outer(weight, base.w)
    lhs = math.fsum((weight * total ** (1.0 / p)).ravel())

    kept = WeightFamily({key: w.weights[key] for key in f})
    cut = threshold_weights(kept, kappa, eps, keep={(i, j): (i - 1,) for i, j in f})
    r = base.size
    blocks = np.zeros((n_blocks * r, len(js)))
    for (i, j), fij in f.items():
        a = _block_function(cut.weights[(i, j)].values, i)
        phi = _block_function(fij.values, i)
        blocks[(i - 1) * r : i * r, js.index(j)] = a * np.abs(phi)
    big = TensorField((coproduct_axis(base, n_blocks), counting(len(js))), blocks)
    couple = Couple(mixed(1.0, (0,), p, (1,)), mixed(p, (0,), p, (1,)))
    k = k_functional(big, 1.0, couple, settings=settings)

    weaker_total = np.zeros(first.values.shape)
    for (i, j), fij in f.items():
        weaker_total = weaker_total + (cut.weights[(i, j)].values * np.abs(fij.values)) ** p
    weaker = math.fsum((weight * weaker_total ** (1.0 / p)).ravel())

    constant = weighted_constant(p, kappa, eps, binary)
    main_ok = lhs >= constant * k.dual * (1.0 - VIOLATION_TOL)
    weak_ok = lhs >= constant * weaker * (1.0 - VIOLATION_TOL)
    if not (main_ok and weak_ok):
        logger.warning("weighted lower bound violated: lhs=%.12g dual=%.12g gap=%.3g", lhs, k.dual, k.gap)
    return CheckReport(
        check="weighted_lower_bound",
        lhs=lhs,
        rhs=k.value,
        constant=constant,
        ratio=safe_ratio(lhs, k.value),
        passed=main_ok and weak_ok,
        asserted=True,
        params={
            "blocks": n_blocks,
            "j": len(js),
            "omega": r,
            "p": p,
            "kappa": kappa,
            "eps": eps,
            "binary": binary,
            "gap": k.gap,
            "dual": k.dual,
            "weaker_rhs": weaker,
            "weaker_passed": weak_ok,
        },
    )


def sample(rng: np.random.Generator, config: ExperimentConfig) -> Instance:
    n, nj, r = config.n, config.j, config.omega
    weights = sample_weights(rng, r, config.weights)
    phi = nonneg(rng, (n, nj, r))
    shape = (n, nj) + (r,) * n
    w = (rng.random(shape) < 0.6).astype(float) if config.binary else rng.random(shape)
    params = {"n": n, "j": nj, "omega": r, "p": config.p, "kappa": config.kappa, "eps": config.eps, "weights": weights}
    return Instance(params, {"phi": phi, "w": w})


def fields_from(instance: Instance) -> tuple[dict[tuple[int, int], TensorField], WeightFamily]:
    base = base_space(instance)
    n = instance.params["n"]
    phi, w = instance.data["phi"], instance.data["w"]
    axes = (base,) * n
    f: dict[tuple[int, int], TensorField] = {}
    ws: dict[tuple[int, int], TensorField] = {}
    for i in range(1, n + 1):
        shape = [1] * n
        shape[i - 1] = base.size
        for j in range(1, phi.shape[1] + 1):
            vals = np.broadcast_to(phi[i - 1, j - 1].reshape(shape), (base.size,) * n)
            f[(i, j)] = TensorField(axes, vals)
            ws[(i, j)] = TensorField(axes, w[i - 1, j - 1])
    return f, WeightFamily(ws)


def evaluate(instance: Instance, config: ExperimentConfig) -> CheckReport:
    f, w = fields_from(instance)
    p = instance.params
    report = check_weighted_lower_bound(f, w, p["p"], p["kappa"], p["eps"], settings=config.solver_settings())
    report.params = {**instance.params, **report.params}
    return report


def perturb(instance: Instance, rng: np.random.Generator, scale: float) -> Instance:
    w = instance.data["w"]
    binary = bool(np.all((w == 0.0) | (w == 1.0)))
    moved = flip(rng, w, scale) if binary else jitter(rng, w, scale, lower=0.0, upper=1.0)
    return instance.with_data(phi=jitter(rng, instance.data["phi"], scale, lower=0.0), w=moved)


def adverse(report: CheckReport) -> float:
    dual = report.params.get("dual")
    if report.error is not None or dual is None:
        return -math.inf
    return report.constant * safe_ratio(dual, report.lhs) if dual > 0.0 else 0.0
