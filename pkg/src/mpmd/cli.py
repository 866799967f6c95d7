"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 validation error, 3 bound-check
failure.  The fully resolved configuration is echoed as one JSON line on
stderr so every run can be reproduced from its log.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import harness
from .arrivals import GenConfig, Model, generate
from .errors import BoundViolation, MPMDError, ValidationError
from .io import load_metric, load_sequence, save_sequence
from .model import DelaySpec
from .offline import offline_solution, instance_from_sequence, solve_opt_blossom, solve_opt_fp
from .radius import radius_table

DEFAULTS = {
    "seed": 0, "m": 200, "trials": 100, "spec": "linear", "model": "centralized",
    "algo": None, "penalty": None, "threads": None, "confidence": 0.95,
    "exact_int": False, "ms": "128,256,512,1024,2048,4096", "alternating": False,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mpmd", description="Stochastic min-cost perfect matching with delays")
    p.add_argument("--config", help="JSON file of option values; explicit flags win")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, metric=True, seq=False):
        if metric:
            sp.add_argument("--metric", help="metric JSON file")
        if seq:
            sp.add_argument("--seq", help="sequence JSON file (instead of --m/--seed)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--m", type=int)
        sp.add_argument("--spec", help="linear | power:<alpha> | table:<path>")
        sp.add_argument("--model", choices=[m.value for m in Model])
        sp.add_argument("--out", help="output file (default: stdout)")

    sp = sub.add_parser("gen", help="generate a request sequence")
    common(sp)

    sp = sub.add_parser("radius", help="print the radius table")
    sp.add_argument("--metric")
    sp.add_argument("--spec")
    sp.add_argument("--out")

    sp = sub.add_parser("simulate", help="run one online algorithm")
    common(sp, seq=True)
    sp.add_argument("--algo")
    sp.add_argument("--penalty", type=float)

    sp = sub.add_parser("opt", help="offline optimum of one sequence")
    common(sp, seq=True)
    sp.add_argument("--penalty", type=float)
    sp.add_argument("--exact-int", dest="exact_int", action="store_const", const=True)

    for name in ("ratio", "bounds"):
        sp = sub.add_parser(name, help="Monte Carlo ratio estimate" if name == "ratio"
                            else "check expected costs against the analytic bounds")
        common(sp)
        sp.add_argument("--trials", type=int)
        sp.add_argument("--algo", help="comma-separated algorithm names")
        sp.add_argument("--penalty", type=float)
        sp.add_argument("--threads", type=int)
        sp.add_argument("--confidence", type=float)
        sp.add_argument("--csv", help="write per-trial records here")

    sp = sub.add_parser("bipartite", help="cost scaling of two-colour greedy")
    sp.add_argument("--ms", help="comma-separated sequence lengths")
    sp.add_argument("--trials", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--alternating", action="store_const", const=True)
    sp.add_argument("--out")
    return p


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, the --config file and explicit flags (in that order)."""
    cfg = {k: v for k, v in DEFAULTS.items() if hasattr(args, k)}
    if args.config:
        try:
            extra = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(extra, dict):
            raise ValidationError("config file must hold a JSON object")
        cfg.update({k.replace("-", "_"): v for k, v in extra.items()})
    for k, v in vars(args).items():
        if v is not None and k != "config":
            cfg[k] = v
        else:
            cfg.setdefault(k, None)
    if cfg.get("threads") is None and "trials" in cfg:
        cfg["threads"] = os.cpu_count() or 1
    return cfg


def _emit(cfg, payload) -> None:
    text = payload if isinstance(payload, str) else json.dumps(payload, indent=2)
    if cfg.get("out"):
        Path(cfg["out"]).write_text(text + ("" if text.endswith("\n") else "\n"))
    else:
        print(text)


def _need(cfg, key):
    if cfg.get(key) is None:
        raise UsageError(f"--{key.replace('_', '-')} is required")
    return cfg[key]


def _sequence(cfg):
    if cfg.get("seq"):
        metric = load_metric(cfg["metric"]) if cfg.get("metric") else None
        return load_sequence(cfg["seq"], metric)
    metric = load_metric(_need(cfg, "metric"))
    return generate(GenConfig(metric, int(cfg["m"]), int(cfg["seed"]), cfg["model"]))


def cmd_gen(cfg):
    metric = load_metric(_need(cfg, "metric"))
    seq = generate(GenConfig(metric, int(cfg["m"]), int(cfg["seed"]), cfg["model"]))
    ref = str(Path(cfg["metric"]).resolve())
    if cfg.get("out"):
        save_sequence(seq, cfg["out"], ref)
    else:
        print(json.dumps(seq.to_json(ref), indent=2))
    return 0


def cmd_radius(cfg):
    metric = load_metric(_need(cfg, "metric"))
    rtab = radius_table(metric, DelaySpec.parse(cfg["spec"]))
    _emit(cfg, rtab.to_json())
    print(f"{'point':>8}  {'rate':>10}  {'radius':>12}", file=sys.stderr)
    for label, lam, r in zip(metric.labels, metric.rates, rtab.rho):
        print(f"{label!s:>8}  {lam:>10.6g}  {r:>12.6g}", file=sys.stderr)
    return 0


def cmd_simulate(cfg):
    seq = _sequence(cfg)
    spec = DelaySpec.parse(cfg["spec"])
    algo = cfg.get("algo") or "radius"
    if algo not in harness.ALGORITHMS:
        raise UsageError(f"unknown algorithm {algo!r}; choose from {sorted(harness.ALGORITHMS)}")
    if algo in harness.PENALTY_ALGORITHMS and cfg.get("penalty") is None:
        raise UsageError(f"--penalty is required for {algo}")
    rtab = radius_table(seq.metric, spec)
    sol = harness.ALGORITHMS[algo](seq.metric, seq, rtab, cfg.get("penalty"))
    _emit(cfg, sol.to_json())
    b = sol.breakdown
    print(f"{algo}: m={len(seq)} connection={b.connection:.6g} delay={b.delay:.6g} "
          f"penalty={b.penalty:.6g} total={b.total:.6g}", file=sys.stderr)
    return 0


def cmd_opt(cfg):
    seq = _sequence(cfg)
    spec = DelaySpec.parse(cfg["spec"])
    p = cfg.get("penalty")
    exact = bool(cfg.get("exact_int"))
    if p is None:
        res = solve_opt_blossom(instance_from_sequence(seq, spec=spec), exact_int=exact)
    else:
        res = solve_opt_fp(seq, spec=spec, p=float(p), exact_int=exact)
    sol = offline_solution(seq, res, spec, p)
    _emit(cfg, {"weight": res.weight, "pairs": [list(e) for e in res.pairs],
                "cleared": list(res.cleared), "solution": sol.to_json()})
    return 0


def _experiment(cfg, default_algos):
    metric = load_metric(_need(cfg, "metric"))
    algos = cfg.get("algo")
    if isinstance(algos, str):
        algos = [a.strip() for a in algos.split(",") if a.strip()]
    if not algos:
        algos = list(default_algos)
        if cfg.get("penalty") is not None:
            algos.append("mpmdfp")
    unknown = [a for a in algos if a not in harness.ALGORITHMS]
    if unknown:
        raise UsageError(f"unknown algorithm(s) {unknown}; choose from {sorted(harness.ALGORITHMS)}")
    return harness.ExperimentConfig(
        metric, DelaySpec.parse(cfg["spec"]), tuple(algos), int(cfg["m"]), int(cfg["trials"]),
        int(cfg["seed"]), cfg.get("penalty"), float(cfg["confidence"]), cfg["model"],
        int(cfg["threads"]))


def cmd_ratio(cfg):
    ecfg = _experiment(cfg, ("greedy", "radius"))
    res = harness.run_experiment(ecfg)
    if cfg.get("csv"):
        Path(cfg["csv"]).write_text(res.to_csv())
    out = res.to_json()
    if ecfg.spec.is_linear:
        out["corrected_ratio"] = {a: harness.corrected_ratio(res, a) for a in ecfg.algorithms}
    _emit(cfg, out)
    return 0


def cmd_bounds(cfg):
    ecfg = _experiment(cfg, ("greedy", "radius"))
    res = harness.run_experiment(ecfg)
    if cfg.get("csv"):
        Path(cfg["csv"]).write_text(res.to_csv())
    report = harness.bound_check(ecfg, res, raise_on_fail=False)
    _emit(cfg, report.to_json())
    if not report.passed:
        bad = next(c for c in report.checks if not c.passed)
        raise BoundViolation(bad.quantity, bad.mean, bad.bound)
    return 0


def cmd_bipartite(cfg):
    ms = cfg["ms"]
    if isinstance(ms, str):
        try:
            ms = [int(v) for v in ms.split(",") if v.strip()]
        except ValueError as exc:
            raise UsageError(f"bad --ms list: {exc}") from exc
    fit = harness.bipartite_scaling(ms, int(cfg["trials"]), int(cfg["seed"]),
                                    alternating=bool(cfg.get("alternating")))
    _emit(cfg, {"slope": fit.slope, "stderr": fit.stderr, "intercept": fit.intercept,
                "ms": list(fit.ms), "mean_cost": list(fit.means)})
    return 0


COMMANDS = {"gen": cmd_gen, "radius": cmd_radius, "simulate": cmd_simulate, "opt": cmd_opt,
            "ratio": cmd_ratio, "bounds": cmd_bounds, "bipartite": cmd_bipartite}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "seq", None) and (args.m is not None or args.seed is not None):
            raise UsageError("--seq cannot be combined with --m/--seed")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = resolve(args)
        print(json.dumps({"resolved_config": cfg}, default=str), file=sys.stderr)
        return COMMANDS[cfg["command"]](cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except BoundViolation as exc:
        print(f"bound violation: {exc}", file=sys.stderr)
        return 3
    except (ValidationError, MPMDError, json.JSONDecodeError) as exc:
        print(f"validation error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
