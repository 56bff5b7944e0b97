"""Extremal search: random restarts plus perturbation hill-climbing on the adverse score.

Restart ``r`` samples its starting point from the same stream as instance
``r`` of a batch run, and draws its perturbations from a separate search
stream, so a budget of 1 reproduces instance 0 of ``run`` exactly.
"""

from __future__ import annotations

import logging
import math
from typing import Any

from ustatlab.core_models import CheckReport, Registry
from ustatlab.engine import evaluate_checked, load_check_module, resolve_check, with_variant
from ustatlab.pyd_models.config import ExperimentConfig
from ustatlab.utils.errors import BadInstanceError
from ustatlab.utils.seeding import instance_rng, search_rng

logger = logging.getLogger(__name__)

STEPS_PER_RESTART = 20
INITIAL_SCALE = 0.5
SHRINK = 0.7
MIN_SCALE = 1e-4


def _score(module: Any, report: CheckReport) -> float:
    if report.error is not None:
        return -math.inf
    score = float(module.adverse(report))
    return score if not math.isnan(score) else -math.inf


def extremal_search(check_id: str, config: ExperimentConfig, registry: Registry | None = None) -> CheckReport:
    """Worst report found within ``config.budget`` evaluations.

    The returned report carries ``params["search"]`` (seed, restart, step,
    budget, score) and ``params["instance"]``, the full descriptor of the
    instance that produced it.

    Raises:
        BadCheckError: ``check_id`` is not registered.
    """
    entry = resolve_check(check_id, registry)
    module = load_check_module(entry)
    config = with_variant(config.model_copy(update={"check": check_id}), entry)

    best: tuple[float, CheckReport, Any, int, int] | None = None
    evaluations = 0
    restart = 0
    while evaluations < config.budget:
        current = module.sample(instance_rng(config.seed, restart), config)
        report = evaluate_checked(module, entry, current, config)
        current_score = _score(module, report)
        evaluations += 1
        if best is None or current_score > best[0]:
            best = (current_score, report, current, restart, 0)
        rng = search_rng(config.seed, restart)
        scale = INITIAL_SCALE
        for step in range(1, STEPS_PER_RESTART + 1):
            if evaluations >= config.budget or scale < MIN_SCALE:
                break
            candidate = module.perturb(current, rng, scale)
            report = evaluate_checked(module, entry, candidate, config)
            score = _score(module, report)
            evaluations += 1
            if score > current_score:
                current, current_score = candidate, score
            else:
                scale *= SHRINK
            if score > best[0]:
                best = (score, report, candidate, restart, step)
        logger.debug("restart %d done after %d evaluations, best %.6g", restart, evaluations, best[0])
        restart += 1

    if best is None:
        raise BadInstanceError("extremal search needs a budget of at least 1")
    score, report, instance, best_restart, step = best
    report.seed = config.seed
    report.instance = best_restart
    report.params = {
        **report.params,
        "search": {
            "seed": config.seed,
            "restart": best_restart,
            "step": step,
            "budget": config.budget,
            "score": score if math.isfinite(score) else None,
        },
        "instance": instance.descriptor(),
    }
    return report
