"""K-functional solver against the grid oracle on instances with few atoms."""

from __future__ import annotations

import math

import numpy as np

from ustatlab.core_models import CheckReport, Couple, TensorField
from ustatlab.interp import DEFAULT_SETTINGS, SolverSettings, k_functional
from ustatlab.norms import parse_couple
from ustatlab.oracles import MAX_GRID_ENTRIES, grid_k
from ustatlab.pyd_models.config import ExperimentConfig
from ustatlab.spaces import make_space

from .common import Instance, jitter, safe_ratio, sample_weights

AGREEMENT_TOL = 1e-4


def check_solver(f: TensorField, t: float, c: Couple, settings: SolverSettings = DEFAULT_SETTINGS) -> CheckReport:
    """Relative disagreement of solver and oracle, plus weak duality against the oracle."""
    res = k_functional(f, t, c, settings=settings)
    oracle = grid_k(f, t, c)
    scale = max(oracle.value, 1e-300)
    error = abs(res.value - oracle.value) / scale
    weak_duality = res.dual <= oracle.value * (1.0 + 1e-12) + 1e-300
    return CheckReport(
        check="solver",
        lhs=res.value,
        rhs=oracle.value,
        constant=1.0,
        ratio=safe_ratio(res.value, oracle.value),
        passed=error <= AGREEMENT_TOL and weak_duality,
        asserted=True,
        params={"t": t, "entries": f.size, "gap": res.gap, "dual": res.dual, "relative_error": error},
    )


def sample(rng: np.random.Generator, config: ExperimentConfig) -> Instance:
    atoms = min(config.omega, MAX_GRID_ENTRIES)
    weights = sample_weights(rng, atoms, config.weights)
    params = {"omega": atoms, "t": config.t, "couple": config.couple, "weights": weights}
    return Instance(params, {"f": rng.standard_normal(atoms)})


def evaluate(instance: Instance, config: ExperimentConfig) -> CheckReport:
    p = instance.params
    f = TensorField((make_space(p["weights"]),), instance.data["f"])
    report = check_solver(f, p["t"], parse_couple(p["couple"], 1), config.solver_settings())
    report.params = {**p, **report.params}
    return report


def perturb(instance: Instance, rng: np.random.Generator, scale: float) -> Instance:
    return instance.with_data(f=jitter(rng, instance.data["f"], scale))


def adverse(report: CheckReport) -> float:
    err = report.params.get("relative_error", math.nan)
    return err if report.error is None and math.isfinite(err) else -math.inf
