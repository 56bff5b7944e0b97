"""K-functionals of mixed-norm couples and the interpolation norms built on them.

``k_functional`` minimizes ``g -> ||P g||_0 + t ||f - P g||_1`` over the
decomposition variable. The iterate is warm-started from the best magnitude
truncation of ``f`` and refined by accelerated projected gradient steps on the
smoothed objective (leaves ``sqrt(x^2 + eps^2)``, ``eps`` lowered one decade
per stage). Gradients are taken in the metric of the product weights so that a
constraint projector, which is self-adjoint for that inner product, keeps every
iterate feasible. The lower bound comes from dual points of
``X_0* cap X_1*`` read off the final gradients.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .core_models import Couple, KResult, NormSpec, Projector, TensorField
from .norms import dual_spec, evaluate, norm, smoothed_norm, validate_spec
from .utils.errors import BadSpecError

logger = logging.getLogger(__name__)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
T_GRID_STEPS = 8
T_GRID_LIMIT = 40


@dataclass(frozen=True)
class SolverSettings:
    """Caps and tolerances of the K-functional solver.

    ``tol`` is relative to the scale ``min(||f||_0, t ||f||_1)``.
    """

    max_iters: int = 20000
    tol: float = 1e-8
    patience: int = 200
    eps_start: float = 1e-2
    eps_stop: float = 1e-10


DEFAULT_SETTINGS = SolverSettings()


class _Problem:
    def __init__(self, f: TensorField, t: float, c: Couple, project: Projector | None) -> None:
        self.f = np.array(f.values, dtype=float)
        self.t = t
        self.couple = c
        self.axes_w = [ax.w for ax in f.axes]
        weight = np.ones(())
        for w in self.axes_w:
            weight = np.multiply.outer(weight, w)
        self.weight = np.broadcast_to(weight, self.f.shape)
        self.project = project if project is not None else (lambda v: np.array(v, dtype=float))

    def norm0(self, g: np.ndarray) -> float:
        return float(evaluate(g, self.axes_w, self.couple.spec0).ravel()[0])

    def norm1(self, h: np.ndarray) -> float:
        return float(evaluate(h, self.axes_w, self.couple.spec1).ravel()[0])

    def objective(self, g: np.ndarray) -> float:
        return self.norm0(g) + self.t * self.norm1(self.f - g)

    def smoothed(self, g: np.ndarray, eps: float) -> tuple[float, np.ndarray]:
        v0, d0 = smoothed_norm(g, self.axes_w, self.couple.spec0, eps)
        v1, d1 = smoothed_norm(self.f - g, self.axes_w, self.couple.spec1, eps)
        return v0 + self.t * v1, (d0 - self.t * d1) / self.weight

    def pair(self, a: np.ndarray, b: np.ndarray) -> float:
        return math.fsum((self.weight * a * b).ravel())

    def dual_value(self, phi0: np.ndarray, phi1: np.ndarray) -> float:
        """Lower bound ``<f, phi1> / max(||phi0||_0*, ||phi1||_1* / t)`` given ``P phi0 = P phi1``."""
        n0 = float(evaluate(phi0, self.axes_w, dual_spec(self.couple.spec0)).ravel()[0])
        n1 = float(evaluate(phi1, self.axes_w, dual_spec(self.couple.spec1)).ravel()[0]) / self.t
        denom = max(n0, n1)
        if not denom > 0.0 or not math.isfinite(denom):
            return 0.0
        return max(0.0, self.pair(self.f, phi1) / denom)


def _shrink(values: np.ndarray, axes_w: Sequence[np.ndarray], node: NormSpec | None, lam: float) -> np.ndarray:
    mag = np.abs(values) if node is None else evaluate(values, axes_w, NormSpec(node.exponent, node.axes))
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(mag > lam, 1.0 - lam / np.where(mag > 0.0, mag, 1.0), 0.0)
    return values * factor


def _truncation_start(prob: _Problem) -> tuple[np.ndarray, float]:
    """Best of ``0``, ``f`` and the magnitude truncations of ``f``, projected."""
    candidates: list[NormSpec | None] = [None, prob.couple.spec0.nodes()[0], prob.couple.spec1.nodes()[0]]
    best = np.zeros_like(prob.f)
    best_val = prob.objective(best)
    whole = prob.project(prob.f)
    if prob.objective(whole) < best_val:
        best, best_val = whole, prob.objective(whole)
    for node in candidates:

        def value(lam: float, node: NormSpec | None = node) -> tuple[float, np.ndarray]:
            g = prob.project(_shrink(prob.f, prob.axes_w, node, lam))
            return prob.objective(g), g

        mags = np.abs(prob.f) if node is None else evaluate(prob.f, prob.axes_w, NormSpec(node.exponent, node.axes))
        levels = np.unique(np.concatenate([[0.0], mags.ravel()]))
        scores = [value(float(lam))[0] for lam in levels]
        k = int(np.argmin(scores))
        lo = float(levels[max(k - 1, 0)])
        hi = float(levels[min(k + 1, len(levels) - 1)])
        a, b = hi - GOLDEN * (hi - lo), lo + GOLDEN * (hi - lo)
        va, vb = value(a)[0], value(b)[0]
        for _ in range(80):
            if va <= vb:
                hi, b, vb = b, a, va
                a = hi - GOLDEN * (hi - lo)
                va = value(a)[0]
            else:
                lo, a, va = a, b, vb
                b = lo + GOLDEN * (hi - lo)
                vb = value(b)[0]
        for lam in (float(levels[k]), a, b):
            val, g = value(lam)
            if val < best_val:
                best, best_val = g, val
    return best, best_val


@dataclass
class _Stage:
    x: np.ndarray
    value: float
    iterations: int = 0
    stopped: bool = False


def _accelerated(
    prob: _Problem, g0: np.ndarray, eps: float, budget: int, scale: float, settings: SolverSettings
) -> _Stage:
    """Projected accelerated gradient with backtracking and adaptive restart."""
    x = g0
    fx, _ = prob.smoothed(x, eps)
    y, theta = x, 1.0
    lip = 1.0 / max(eps, 1e-300)
    best = _Stage(x=x, value=prob.objective(x))
    window_start = best.value
    for it in range(1, budget + 1):
        fy, gy = prob.smoothed(y, eps)
        while True:
            x_new = prob.project(y - gy / lip)
            diff = x_new - y
            f_new, _ = prob.smoothed(x_new, eps)
            bound = fy + prob.pair(gy, diff) + 0.5 * lip * prob.pair(diff, diff)
            if f_new <= bound + 1e-15 * abs(fy) or lip > 1e300:
                break
            lip *= 2.0
        if f_new > fx:
            y, theta = x, 1.0
        else:
            theta_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * theta * theta))
            y = x_new + ((theta - 1.0) / theta_new) * (x_new - x)
            x, fx, theta = x_new, f_new, theta_new
            lip *= 0.9
            true_val = prob.objective(x)
            if true_val < best.value:
                best.x, best.value = x, true_val
        best.iterations = it
        if it % settings.patience == 0:
            if window_start - best.value < settings.tol * scale:
                best.stopped = True
                return best
            window_start = best.value
    best.iterations = budget
    return best


def _certificate(prob: _Problem, g: np.ndarray, eps: float, constrained: bool) -> float:
    _, d0 = smoothed_norm(g, prob.axes_w, prob.couple.spec0, eps)
    _, d1 = smoothed_norm(prob.f - g, prob.axes_w, prob.couple.spec1, eps)
    phi0 = d0 / prob.weight
    phi1 = prob.t * d1 / prob.weight
    if not constrained:
        mid = 0.5 * (phi0 + phi1)
        return max(prob.dual_value(phi0, phi0), prob.dual_value(phi1, phi1), prob.dual_value(mid, mid))
    p0, p1 = prob.project(phi0), prob.project(phi1)
    return max(prob.dual_value(phi0 - p0 + p1, phi1), prob.dual_value(phi0, phi1 - p1 + p0))


def k_functional(
    f: TensorField,
    t: float,
    c: Couple,
    constraint: Projector | None = None,
    settings: SolverSettings = DEFAULT_SETTINGS,
) -> KResult:
    """``K(f, t; X_0, X_1)``, optionally over decompositions inside ``range(constraint)``.

    Returns the best decomposition found. ``gap`` is ``value - dual`` where
    ``dual`` is a certified lower bound, or ``inf`` when the iteration cap
    stopped the last smoothing stage.

    Raises:
        BadSpecError: ``t <= 0``, specs not covering ``f`` or ``f`` outside the constraint.
    """
    if not t > 0.0 or not math.isfinite(t):
        raise BadSpecError(f"t must be a positive real, got {t!r}")
    validate_spec(c.spec0, f.ndim)
    validate_spec(c.spec1, f.ndim)
    prob = _Problem(f, float(t), c, constraint)
    top = float(np.abs(prob.f).max(initial=0.0))
    zero = f.with_values(np.zeros_like(prob.f))
    if top == 0.0:
        return KResult(value=0.0, part0=zero, part1=zero, gap=0.0, dual=0.0, iterations=0)
    if constraint is not None and float(np.abs(prob.project(prob.f) - prob.f).max()) > 1e-9 * top:
        raise BadSpecError("f does not lie in the constraint subspace")
    scale = min(prob.norm0(prob.f), prob.t * prob.norm1(prob.f))

    g, value = _truncation_start(prob)
    stages = max(1, round(math.log10(settings.eps_start / settings.eps_stop)) + 1)
    budget = max(settings.patience, settings.max_iters // stages)
    used = 0
    converged = True
    for k in range(stages):
        if used >= settings.max_iters:
            converged = False
            break
        eps = settings.eps_start * 10.0 ** (-k) * top
        stage = _accelerated(prob, g, eps, min(budget, settings.max_iters - used), scale, settings)
        used += stage.iterations
        if stage.value < value:
            g, value = stage.x, stage.value
        converged = stage.stopped
        logger.debug("stage eps=%.1e value=%.12g iterations=%d", eps, stage.value, stage.iterations)

    constrained = constraint is not None
    dual = max(_certificate(prob, g, settings.eps_stop * top * s, constrained) for s in (1.0, 1e4, 1e6))
    dual = min(dual, value)
    gap = value - dual
    if not converged and gap > settings.tol * scale:
        logger.warning("K-functional hit the iteration cap with gap %.3g", gap)
        gap = math.inf
    return KResult(
        value=value,
        part0=f.with_values(g),
        part1=f.with_values(prob.f - g),
        gap=gap,
        dual=dual,
        iterations=used,
    )


def sum_norm(f: TensorField, c: Couple, settings: SolverSettings = DEFAULT_SETTINGS) -> float:
    """``||f||_{X_0 + X_1} = K(f, 1)``."""
    return k_functional(f, 1.0, c, settings=settings).value


def intersection_norm(f: TensorField, c: Couple) -> float:
    return max(norm(f, c.spec0), norm(f, c.spec1))


def theta_q_norm(
    f: TensorField, c: Couple, theta: float, q: float, settings: SolverSettings = DEFAULT_SETTINGS
) -> float:
    """``(int_0^inf (t^-theta K(f,t))^q dt/t)^(1/q)`` by quadrature in ``log t``.

    The grid ``t = 2^(k/8)`` is walked outwards from ``t = 1`` until ``K``
    saturates one of the bounds ``t ||f||_1`` (downwards) or ``||f||_0``
    (upwards), at most to ``2^(+-40)``; the tails beyond are integrated in
    closed form from those bounds.
    """
    if not 0.0 < theta < 1.0 or not 1.0 <= q < math.inf:
        raise BadSpecError("need theta in (0,1) and q in [1,inf)")
    n0, n1 = norm(f, c.spec0), norm(f, c.spec1)
    if n0 == 0.0:
        return 0.0

    def kval(k: int) -> float:
        t = 2.0 ** (k / T_GRID_STEPS)
        return min(k_functional(f, t, c, settings=settings).value, n0, t * n1)

    samples = {0: kval(0)}
    limit = T_GRID_LIMIT * T_GRID_STEPS
    lo = 0
    while lo > -limit and not math.isclose(samples[lo], 2.0 ** (lo / T_GRID_STEPS) * n1, rel_tol=1e-9):
        lo -= 1
        samples[lo] = kval(lo)
    hi = 0
    while hi < limit and not math.isclose(samples[hi], n0, rel_tol=1e-9):
        hi += 1
        samples[hi] = kval(hi)

    logs = np.array([k / T_GRID_STEPS * math.log(2.0) for k in range(lo, hi + 1)])
    ts = np.exp(logs)
    integrand = (ts ** (-theta) * np.array([samples[k] for k in range(lo, hi + 1)])) ** q
    middle = float(np.trapezoid(integrand, logs)) if len(logs) > 1 else 0.0
    t_lo, t_hi = float(ts[0]), float(ts[-1])
    lower = n1**q * t_lo ** ((1.0 - theta) * q) / ((1.0 - theta) * q)
    upper = n0**q * t_hi ** (-theta * q) / (theta * q)
    return (lower + middle + upper) ** (1.0 / q)


def k_closedness_ratio(
    f: TensorField, t: float, c: Couple, projector: Projector, settings: SolverSettings = DEFAULT_SETTINGS
) -> float:
    """Constrained over unconstrained K-functional; 1 at ``f = 0``."""
    if not np.any(f.values):
        return 1.0
    inside = k_functional(f, t, c, constraint=projector, settings=settings)
    outside = k_functional(f, t, c, settings=settings)
    return inside.value / min(outside.value, inside.value)


@dataclass
class KCurve:
    ts: list[float]
    values: list[float]
    gaps: list[float]
    monotone: bool
    concave: bool


def k_curve(
    f: TensorField, c: Couple, ts: Sequence[float], tol: float = 1e-8, settings: SolverSettings = DEFAULT_SETTINGS
) -> KCurve:
    """``K(f, t)`` over increasing ``ts`` with monotonicity and concavity diagnostics.

    Violations are judged against ``tol`` times the largest value plus the
    solver gaps of the points involved.
    """
    grid = sorted(float(t) for t in ts)
    results = [k_functional(f, t, c, settings=settings) for t in grid]
    vals = [r.value for r in results]
    gaps = [r.gap for r in results]
    slack = tol * max(vals, default=0.0)
    monotone = all(b >= a - slack - ga - gb for a, b, ga, gb in zip(vals, vals[1:], gaps, gaps[1:], strict=False))
    concave = True
    for k in range(1, len(grid) - 1):
        left = (vals[k] - vals[k - 1]) / (grid[k] - grid[k - 1])
        right = (vals[k + 1] - vals[k]) / (grid[k + 1] - grid[k])
        step = min(grid[k] - grid[k - 1], grid[k + 1] - grid[k])
        allow = (2.0 * slack + gaps[k - 1] + 2.0 * gaps[k] + gaps[k + 1]) / step
        if right > left + allow:
            concave = False
    return KCurve(ts=grid, values=vals, gaps=gaps, monotone=monotone, concave=concave)
