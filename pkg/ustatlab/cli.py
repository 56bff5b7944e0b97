"""Command-line interface for ustat-lab.

Subcommands run registered checks over seeded batches (``run``, ``check``),
search for adverse instances (``search``), run the decomposition pipelines
(``decompose``), evaluate interpolation functionals on small atom vectors
(``kfun``, ``thetaq``), compare coupled and decoupled moments (``decouple``)
and expose the brute-force oracles (``oracle``). Every handler prints a JSON
summary and returns the process exit status.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any

import numpy as np

from .core_models import CheckReport
from .decomp import canonical_decompose, check_disjoint, check_reconstruction
from .emitters import emit_decomposition, emit_field
from .engine import build_config, load_registry, run_experiment
from .hoeffding import hoeffding_project
from .interp import k_functional, theta_q_norm
from .norms import parse_couple
from .oracles import bucket_optimum, grid_k, inclusion_exclusion_project
from .pyd_models.config import ExperimentConfig
from .pyd_models.report import ReportRecord, plain
from .spaces import atoms_field, field, make_space
from .utils.errors import UstatLabError
from .utils.seeding import instance_rng
from .utils.validator import load_config_file
from .verify import canonical, decoupling, trivial
from .verify.common import base_space, family_from_arrays, sample_weights
from .verify.search import extremal_search

PIPELINES = ("js", "four-summand", "multilevel", "canonical")
INSTANCE_FLAGS = (
    ("omega", int),
    ("n", int),
    ("m", int),
    ("j", int),
    ("value-dim", int),
    ("p", float),
    ("q", float),
    ("kappa", float),
    ("eps", float),
    ("theta", float),
    ("t", float),
    ("level", int),
    ("weights", str),
    ("couple", str),
    ("variant", str),
    ("cap", float),
)


def _print(payload: dict[str, Any]) -> None:
    print(json.dumps(plain(payload), indent=2, sort_keys=True))


def _record(report: CheckReport) -> dict[str, Any]:
    return ReportRecord.from_report(report).model_dump()


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="Master seed (u64)")
    p.add_argument("--out", type=str, default=None, help="Output directory for reports")
    p.add_argument("--format", choices=["jsonl", "csv", "both"], default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--count", type=int, default=None, help="Number of seeded instances")
    p.add_argument("--tol", type=float, default=None, help="Solver tolerance")
    method = p.add_mutually_exclusive_group()
    method.add_argument("--exact", dest="method", action="store_const", const="exact", default=None)
    method.add_argument(
        "--mc", dest="mc_samples", type=int, default=None, metavar="N", help="Monte Carlo with N samples"
    )
    p.add_argument("--timing", action="store_const", const=True, default=None, help="Write runtime_ms into reports")


def _add_instance_flags(p: argparse.ArgumentParser) -> None:
    for flag, kind in INSTANCE_FLAGS:
        p.add_argument(f"--{flag}", type=kind, default=None)


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    keys = [flag.replace("-", "_") for flag, _ in INSTANCE_FLAGS]
    keys += ["seed", "out", "format", "threads", "count", "tol", "method", "timing", "budget"]
    out = {k: getattr(args, k, None) for k in keys}
    if getattr(args, "mc_samples", None) is not None:
        out["method"] = "mc"
        out["mc_samples"] = args.mc_samples
    return out


def _finish_run(config: ExperimentConfig) -> int:
    result = run_experiment(config)
    _print({
        "status": "ok",
        "check": config.check,
        "instances": len(result.reports),
        "failed": sum(1 for r in result.reports if r.asserted and r.passed is False),
        "errors": sum(1 for r in result.reports if r.error is not None),
        "max_ratio": max((r.ratio for r in result.reports if r.error is None), default=None),
        "outputs": [str(p) for p in result.outputs],
        "exit_status": result.exit_status,
    })
    return result.exit_status


def _handle_run(args: argparse.Namespace) -> int:
    """Run the experiment described by a config file; flags override file keys."""
    config = build_config(load_config_file(args.config), _overrides(args))
    return _finish_run(config)


def _handle_check(args: argparse.Namespace) -> int:
    config = build_config({"check": args.name}, _overrides(args))
    return _finish_run(config)


def _handle_search(args: argparse.Namespace) -> int:
    config = build_config({"check": args.name}, _overrides(args))
    report = extremal_search(args.name, config)
    _print({"status": "ok", "worst": _record(report)})
    return 0


def _handle_decompose(args: argparse.Namespace) -> int:
    """Run one pipeline on a seeded nonnegative instance and write the decomposition JSON."""
    variant = None if args.pipeline == "canonical" else args.pipeline
    config = build_config({"check": args.pipeline, "variant": variant}, _overrides(args))
    rng = instance_rng(config.seed, 0)
    if args.pipeline == "canonical":
        instance = canonical.sample(rng, config)
        p = instance.params
        k = family_from_arrays(base_space(instance), p["n"], p["m"], instance.data["kernels"], strict=True)
        d = canonical_decompose(k, p["p"])
        checks = {"reconstruction_error": check_reconstruction(d), "disjoint": check_disjoint(d), "passed": None}
    else:
        instance = trivial.sample(rng, config)
        d = trivial.run_pipeline(args.pipeline, instance)
        cap = config.cap or float(d.meta.get("cap", 64.0))
        report = trivial.check_trivial_direction(d, cap, f"decompose_{args.pipeline}")
        checks = {**report.params, "passed": report.passed, "ratio": report.ratio}
    out_dir = Path(config.out or "build")
    out_dir.mkdir(parents=True, exist_ok=True)
    path = emit_decomposition(d, out_dir, name=f"decomposition_{args.pipeline}.json", extra=checks)
    target = emit_field(d.target, out_dir / f"decomposition_{args.pipeline}_target.npy")
    _print({
        "status": "ok",
        "pipeline": args.pipeline,
        "path": str(path),
        "target": str(target),
        "lhs": d.lhs,
        "certificates": d.certificates,
        "passed": checks["passed"],
    })
    return 1 if checks["passed"] is False else 0


def _values(args: argparse.Namespace) -> list[float]:
    if args.values:
        return [float(v) for v in args.values.split(",")]
    return [args.value] * args.atoms


def _handle_kfun(args: argparse.Namespace) -> int:
    f = atoms_field(args.mass, _values(args))
    res = k_functional(f, args.t, parse_couple(args.couple, 1))
    _print({
        "status": "ok",
        "value": res.value,
        "dual": res.dual,
        "gap": res.gap,
        "iterations": res.iterations,
        "part0": res.part0.values,
        "part1": res.part1.values,
    })
    return 0


def _handle_thetaq(args: argparse.Namespace) -> int:
    f = atoms_field(args.mass, _values(args))
    value = theta_q_norm(f, parse_couple(args.couple, 1), args.theta, args.q)
    _print({"status": "ok", "value": value, "theta": args.theta, "q": args.q})
    return 0


def _handle_decouple(args: argparse.Namespace) -> int:
    config = build_config({"check": "decoupling"}, _overrides(args))
    instance = decoupling.sample(instance_rng(config.seed, 0), config)
    p = instance.params
    k = family_from_arrays(base_space(instance), p["n"], p["m"], instance.data["kernels"], strict=True)
    coupled, decoupled = decoupling.moment_ratio(k, p["q"])
    _print({
        "status": "ok",
        "coupled": coupled,
        "decoupled": decoupled,
        "ratio": coupled / decoupled if decoupled else None,
        "params": p,
    })
    return 0


def _handle_oracle(args: argparse.Namespace) -> int:
    if args.oracle == "kfun-grid":
        f = atoms_field(args.mass, _values(args))
        res = grid_k(f, args.t, parse_couple(args.couple, 1))
        _print({"status": "ok", "value": res.value, "argmin": res.argmin, "evaluations": res.evaluations})
        return 0
    config = build_config({"check": args.oracle}, _overrides(args))
    rng = instance_rng(config.seed, 0)
    if args.oracle == "bucket":
        instance = trivial.sample(rng, config.model_copy(update={"variant": "multilevel"}))
        d = trivial.run_pipeline("multilevel", instance)
        res = bucket_optimum(d.target, config.p)
        _print({
            "status": "ok",
            "value": res.value,
            "pipeline_sum": d.certificate_sum,
            "lhs": d.lhs,
            "evaluations": res.evaluations,
        })
        return 0
    axes = (make_space(sample_weights(rng, config.omega, config.weights)),) * config.n
    f = field(axes, rng.standard_normal((config.omega,) * config.n))
    subset = [int(a) for a in args.subset.split(",") if a.strip()] if args.subset else []
    brute = inclusion_exclusion_project(f, subset)
    fast = hoeffding_project(f, subset)
    _print({
        "status": "ok",
        "subset": subset,
        "values": brute.values,
        "max_difference": float(np.abs(brute.values - fast.values).max(initial=0.0)),
    })
    return 0


def _handle_list(args: argparse.Namespace) -> int:
    registry = load_registry(args.registry)
    _print({
        "status": "ok",
        "checks": [
            {"check_id": c.check_id, "asserted": c.asserted, "module": c.check_module, "description": c.description}
            for c in registry.checks
        ],
    })
    return 0


def _add_atom_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--atoms", type=int, default=1, help="Number of atoms")
    p.add_argument("--mass", type=float, default=1.0, help="Mass of every atom")
    p.add_argument("--value", type=float, default=1.0, help="Value on every atom")
    p.add_argument("--values", type=str, default=None, help="Comma-separated values, overrides --atoms/--value")
    p.add_argument("--couple", type=str, default="L1,L2")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ustat-lab", description="U-statistic moment inequality lab")
    parser.add_argument("--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run an experiment config")
    run.add_argument("--config", type=Path, required=True, help="Experiment YAML/JSON")
    _add_run_flags(run)
    _add_instance_flags(run)

    check = sub.add_parser("check", help="Run a registered check from flags")
    check.add_argument("name")
    _add_run_flags(check)
    _add_instance_flags(check)

    search = sub.add_parser("search", help="Extremal search for a registered check")
    search.add_argument("name")
    search.add_argument("--budget", type=int, default=None)
    _add_run_flags(search)
    _add_instance_flags(search)

    dec = sub.add_parser("decompose", help="Run a decomposition pipeline on a seeded instance")
    dec.add_argument("pipeline", choices=PIPELINES)
    _add_run_flags(dec)
    _add_instance_flags(dec)

    kfun = sub.add_parser("kfun", help="K-functional of an atom vector")
    _add_atom_flags(kfun)
    kfun.add_argument("--t", type=float, default=1.0)

    thetaq = sub.add_parser("thetaq", help="(theta, q) interpolation norm of an atom vector")
    _add_atom_flags(thetaq)
    thetaq.add_argument("--theta", type=float, default=0.5)
    thetaq.add_argument("--q", type=float, default=1.0)

    dcp = sub.add_parser("decouple", help="Coupled and decoupled moments of a seeded instance")
    _add_run_flags(dcp)
    _add_instance_flags(dcp)

    orc = sub.add_parser("oracle", help="Brute-force oracles")
    orc.add_argument("oracle", choices=["kfun-grid", "bucket", "inclusion-exclusion"])
    _add_atom_flags(orc)
    orc.add_argument("--t", type=float, default=1.0)
    orc.add_argument("--subset", type=str, default=None, help="Comma-separated coordinates for inclusion-exclusion")
    for flag in ("omega", "n", "m"):
        orc.add_argument(f"--{flag}", type=int, default=None)
    orc.add_argument("--p", type=float, default=None)
    orc.add_argument("--weights", type=str, default=None)
    orc.add_argument("--seed", type=int, default=None)

    lst = sub.add_parser("list", help="List registered checks")
    lst.add_argument("--registry", type=Path, default=None)
    return parser


HANDLERS = {
    "run": _handle_run,
    "check": _handle_check,
    "search": _handle_search,
    "decompose": _handle_decompose,
    "kfun": _handle_kfun,
    "thetaq": _handle_thetaq,
    "decouple": _handle_decouple,
    "oracle": _handle_oracle,
    "list": _handle_list,
}


def main(argv: Sequence[str] | None = None) -> int:
    """CLI entrypoint; returns 0 on success, 1 on an asserted failure, 2 on usage or config errors."""
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return HANDLERS[args.command](args)
    except UstatLabError as exc:
        _print({"status": "error", "error": f"{type(exc).__name__}: {exc}"})
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
