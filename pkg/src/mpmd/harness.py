"""Monte Carlo estimation of ratio-of-expectations and analytic bound checks."""
from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from statistics import NormalDist

import numpy as np
from scipy import stats

from .arrivals import GenConfig, Model, derive_seed, generate
from .errors import BoundViolation, InsufficientRange, ValidationError
from .model import LINEAR, DelaySpec, MetricSpace, RequestSequence
from .offline import optimal_solution
from .online import run_bipartite_greedy, run_greedy, run_mpmdfp, run_radius
from .radius import RadiusTable, compute_Kf, radius_table

CSV_COLUMNS = ("trial", "seed", "algo", "connection", "delay", "penalty", "total", "opt_total")
BOUND_CONFIDENCE = 0.99


def _greedy(metric, seq, rtab, penalty):
    return run_greedy(metric, seq, rtab.spec)


def _radius(metric, seq, rtab, penalty):
    return run_radius(metric, seq, rtab)


def _mpmdfp(metric, seq, rtab, penalty):
    return run_mpmdfp(metric, seq, rtab, penalty)


# name -> fn(metric, seq, radius_table, penalty) -> Solution; algorithms listed in
# PENALTY_ALGORITHMS are compared against the penalty-variant optimum
ALGORITHMS = {"greedy": _greedy, "radius": _radius, "mpmdfp": _mpmdfp}
PENALTY_ALGORITHMS = {"mpmdfp"}


def rescale_instance(metric: MetricSpace, seq: RequestSequence, c: float):
    """Scale distances and arrival times by ``c`` (rates by ``1/c``)."""
    m2 = metric.scaled(c)
    return m2, RequestSequence(m2, seq.arrivals * c, seq.locations)


@dataclass(frozen=True)
class ExperimentConfig:
    metric: MetricSpace
    spec: DelaySpec = LINEAR
    algorithms: tuple = ("greedy", "radius")
    m: int = 200
    trials: int = 100
    seed: int = 0
    penalty: float | None = None
    confidence: float = 0.95
    model: Model = Model.CENTRALIZED
    threads: int | None = 1
    scale: float = 1.0

    def __post_init__(self):
        if self.trials < 2:
            raise ValidationError("need at least two trials")
        if self.m < 2 or self.m % 2:
            raise ValidationError(f"m must be even and >= 2, got {self.m}")
        if not 0 < self.confidence < 1:
            raise ValidationError("confidence must lie in (0, 1)")
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        object.__setattr__(self, "model", Model(self.model))
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ValidationError(f"unknown algorithm {a!r}")
            if a in PENALTY_ALGORITHMS and self.penalty is None:
                raise ValidationError(f"algorithm {a!r} needs a penalty")
        if self.penalty is not None and not self.penalty > 0:
            raise ValidationError("penalty must be positive")

    def to_json(self) -> dict:
        return {"metric_points": self.metric.n, "spec": str(self.spec),
                "algorithms": list(self.algorithms), "m": self.m, "trials": self.trials,
                "seed": self.seed, "penalty": self.penalty, "confidence": self.confidence,
                "model": self.model.value, "threads": self.threads, "scale": self.scale}


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    seed: int
    algo: str
    connection: float
    delay: float
    penalty: float
    total: float
    opt_total: float


@dataclass(frozen=True)
class AlgoSummary:
    mean: float
    se: float
    ci: tuple
    opt_mean: float
    opt_se: float
    ratio: float
    ratio_se: float
    ratio_ci: tuple


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    summaries: dict
    records: list = field(repr=False)

    def ratio(self, algo: str) -> float:
        return self.summaries[algo].ratio

    def totals(self, algo: str) -> np.ndarray:
        return np.array([r.total for r in self.records if r.algo == algo])

    def opt_totals(self, algo: str) -> np.ndarray:
        return np.array([r.opt_total for r in self.records if r.algo == algo])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.records:
            w.writerow([r.trial, r.seed, r.algo, *(repr(float(v)) for v in
                        (r.connection, r.delay, r.penalty, r.total, r.opt_total))])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {"config": self.config.to_json(),
                "algorithms": {a: asdict(s) for a, s in self.summaries.items()}}


def _run_trial(cfg: ExperimentConfig, rtab: RadiusTable, trial: int) -> list[TrialRecord]:
    sub = derive_seed(cfg.seed, trial)
    seq = generate(GenConfig(cfg.metric, cfg.m, sub, cfg.model))
    metric = cfg.metric
    if cfg.scale != 1.0:
        metric, seq = rescale_instance(metric, seq, cfg.scale)
        rtab = radius_table(metric, cfg.spec)
    opt = {}
    out = []
    for name in cfg.algorithms:
        fp = name in PENALTY_ALGORITHMS
        if fp not in opt:
            opt[fp] = optimal_solution(seq, cfg.spec, cfg.penalty if fp else None).total
        sol = ALGORITHMS[name](metric, seq, rtab, cfg.penalty)
        b = sol.breakdown
        out.append(TrialRecord(trial, sub, name, b.connection, b.delay, b.penalty, b.total, opt[fp]))
    return out


def _trial_batch(args):
    cfg, rtab, trials = args
    return [rec for t in trials for rec in _run_trial(cfg, rtab, t)]


def _z(level: float) -> float:
    return NormalDist().inv_cdf(level)


def summarize(a: np.ndarray, o: np.ndarray, confidence: float) -> AlgoSummary:
    """Ratio of means with a paired delta-method standard error."""
    T = len(a)
    z = _z(0.5 + confidence / 2)
    ma, mo = math.fsum(a) / T, math.fsum(o) / T
    va, vo = np.var(a, ddof=1), np.var(o, ddof=1)
    cov = np.cov(a, o, ddof=1)[0, 1]
    se_a, se_o = math.sqrt(va / T), math.sqrt(vo / T)
    r = ma / mo
    var_r = max(va - 2 * r * cov + r * r * vo, 0.0) / (T * mo * mo)
    se_r = math.sqrt(var_r)
    return AlgoSummary(ma, se_a, (ma - z * se_a, ma + z * se_a), mo, se_o,
                       r, se_r, (r - z * se_r, r + z * se_r))


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run every algorithm and the offline optimum on the same T sequences.

    Trial ``i`` draws from ``derive_seed(seed, i)``, so the result does not
    depend on the number of worker processes.
    """
    rtab = radius_table(cfg.metric, cfg.spec)
    threads = cfg.threads or os.cpu_count() or 1
    trials = list(range(cfg.trials))
    if threads <= 1:
        records = _trial_batch((cfg, rtab, trials))
    else:
        chunks = [trials[i::threads] for i in range(threads)]
        with ProcessPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(_trial_batch, [(cfg, rtab, c) for c in chunks if c]))
        records = sorted((r for p in parts for r in p),
                         key=lambda r: (r.trial, cfg.algorithms.index(r.algo)))
    summaries = {}
    for name in cfg.algorithms:
        rows = [r for r in records if r.algo == name]
        summaries[name] = summarize(np.array([r.total for r in rows]),
                                    np.array([r.opt_total for r in rows]), cfg.confidence)
    return ExperimentResult(cfg, summaries, records)


@dataclass(frozen=True)
class Bounds:
    greedy_ub: float
    radius_ub: float
    opt_lb: float
    fp_alg_ub: float | None = None
    fp_opt_lb: float | None = None
    greedy_additive: float = 0.0
    radius_additive: float = 0.0

    def to_json(self) -> dict:
        return asdict(self)


def analytic_bounds(metric: MetricSpace, m: int, spec: DelaySpec = LINEAR,
                    p: float | None = None, rtab: RadiusTable | None = None) -> Bounds:
    """Expected-cost upper bounds for Greedy and Radius and the lower bound for OPT.

    For non-linear delay the radii are the general ones and the OPT bound
    uses ``m / (2 K_f)`` in place of ``m (1 - e^-2) / 4``; the penalty
    bounds are only emitted for linear delay.
    """
    rtab = rtab if rtab is not None else radius_table(metric, spec)
    rho = np.asarray(rtab.rho)
    pi = metric.location_probs
    n = metric.n
    s = math.fsum(pi * rho)
    g_add = 2 * n * (metric.d_max + 1.0 / metric.total_rate)
    r_add = 0.5 * n * metric.d_max
    if spec.is_linear:
        lb_coef = m * -math.expm1(-2.0) / 4.0
    else:
        lb_coef = m / (2.0 * compute_Kf(spec))
    fp_ub = fp_lb = None
    if spec.is_linear:
        cap = rho if p is None else np.minimum(rho, p)
        sp = math.fsum(pi * cap)
        fp_ub = 2 * m * sp + r_add
        fp_lb = lb_coef * sp
    return Bounds(4 * m * s + g_add, 2 * m * s + r_add, lb_coef * s, fp_ub, fp_lb, g_add, r_add)


@dataclass(frozen=True)
class BoundCheck:
    quantity: str
    kind: str          # "upper" or "lower"
    mean: float
    se: float
    bound: float
    passed: bool


@dataclass
class BoundReport:
    bounds: Bounds
    checks: list
    result: ExperimentResult = field(repr=False)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json(self) -> dict:
        return {"bounds": self.bounds.to_json(), "passed": self.passed,
                "checks": [asdict(c) for c in self.checks]}


def _check(quantity, kind, values, bound, z):
    T = len(values)
    mean = math.fsum(values) / T
    se = float(np.std(values, ddof=1)) / math.sqrt(T)
    if kind == "upper":
        ok = mean - z * se <= bound
    else:
        ok = mean + z * se >= bound
    return BoundCheck(quantity, kind, mean, se, bound, bool(ok))


def bound_check(cfg: ExperimentConfig, result: ExperimentResult | None = None,
                raise_on_fail: bool = True) -> BoundReport:
    """Compare Monte Carlo means with the analytic bounds at one-sided 99%.

    An upper bound fails only if even the lower confidence limit exceeds
    it, and symmetrically for the lower bound on OPT.
    """
    result = result if result is not None else run_experiment(cfg)
    b = analytic_bounds(cfg.metric, cfg.m, cfg.spec, cfg.penalty)
    z = _z(BOUND_CONFIDENCE)
    checks = []
    plain = [a for a in cfg.algorithms if a not in PENALTY_ALGORITHMS]
    ub = {"greedy": b.greedy_ub, "radius": b.radius_ub}
    for a in plain:
        if a in ub:
            checks.append(_check(a, "upper", result.totals(a), ub[a], z))
    if plain:
        checks.append(_check("opt", "lower", result.opt_totals(plain[0]), b.opt_lb, z))
    fp = [a for a in cfg.algorithms if a in PENALTY_ALGORITHMS]
    if fp and b.fp_alg_ub is not None:
        checks.append(_check(fp[0], "upper", result.totals(fp[0]), b.fp_alg_ub, z))
        checks.append(_check("opt_fp", "lower", result.opt_totals(fp[0]), b.fp_opt_lb, z))
    report = BoundReport(b, checks, result)
    if raise_on_fail and not report.passed:
        bad = next(c for c in checks if not c.passed)
        raise BoundViolation(bad.quantity, bad.mean, bad.bound)
    return report


def corrected_ratio(result: ExperimentResult, algo: str) -> float:
    """Ratio of means after removing the bound's |X|-dependent additive term."""
    b = analytic_bounds(result.config.metric, result.config.m, result.config.spec,
                        result.config.penalty)
    add = b.greedy_additive if algo == "greedy" else b.radius_additive
    s = result.summaries[algo]
    return max(s.mean - add, 0.0) / s.opt_mean


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    stderr: float
    intercept: float
    ms: tuple
    means: tuple


def _bipartite_costs(args):
    m, trials, seed, rate_a, rate_b, alternating = args
    colors = np.arange(m) % 2 if alternating else None
    return [run_bipartite_greedy(rate_a, rate_b, m, derive_seed(seed, m, t), colors).cost
            for t in range(trials)]


def bipartite_scaling(ms, trials: int = 100, seed: int = 0, rate_a: float = 0.5,
                      rate_b: float = 0.5, alternating: bool = False) -> ScalingFit:
    """Least-squares slope of log mean cost against log m for the two-colour greedy."""
    ms = sorted(set(int(m) for m in ms))
    if len(ms) < 2 or math.log10(ms[-1] / ms[0]) < 1.5:
        raise InsufficientRange("need at least two sizes spanning 1.5 decades")
    means = [math.fsum(c) / trials for c in
             map(_bipartite_costs, [(m, trials, seed, rate_a, rate_b, alternating) for m in ms])]
    fit = stats.linregress(np.log(ms), np.log(means))
    return ScalingFit(float(fit.slope), float(fit.stderr), float(fit.intercept),
                      tuple(ms), tuple(means))


def pending_profile(m: int, trials: int, seed: int = 0, rate_a: float = 0.5,
                    rate_b: float = 0.5) -> np.ndarray:
    """Mean pending count after each of the first ``m`` arrivals."""
    acc = np.zeros(m)
    for t in range(trials):
        acc += run_bipartite_greedy(rate_a, rate_b, m, derive_seed(seed, m, t)).pending
    return acc / trials
