"""Optimizers, threshold searches, distance conversion and parameter sweeps."""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.signal import find_peaks

from .collective import key_rate_collective
from .config import Axis, distance_to_transmittance, flatten_scenario, transmittance_to_distance, with_params
from .individual import COLLECTIVE, INDIVIDUAL, KeyRateReport, key_rate_individual
from .scenario import OPTIMIZED, Interferometer, Scenario, ScenarioError, SideChannelB, Weighted

__all__ = [
    "distance_to_transmittance",
    "transmittance_to_distance",
    "key_rate",
    "OptimizationResult",
    "ThresholdResult",
    "SweepGrid",
    "SweepRecord",
    "optimize_modulation",
    "optimize_monitor_weight",
    "find_eps_max",
    "find_vn_max",
    "find_max_distance",
    "run_sweep",
]

GRID_POINTS = 64
REL_TOL = 1e-6
PARAM_TOL = 1e-8
K_TOL = 1e-10
# smallest distance used for noisy channels, where eta = 1 has no cloner model
MIN_NOISY_DISTANCE_KM = 1e-3

EDGE = "edge_maximum"
MULTIMODAL = "multimodal"
INSECURE_AT_ZERO = "insecure_at_zero"
BRACKET_EXHAUSTED = "bracket_exhausted"


def key_rate(scenario: Scenario, attack: str = COLLECTIVE) -> KeyRateReport:
    if attack == INDIVIDUAL:
        return key_rate_individual(scenario)
    if attack == COLLECTIVE:
        return key_rate_collective(scenario)
    raise ValueError(f"unknown attack model {attack!r}")


@dataclass(frozen=True)
class OptimizationResult:
    x: float
    K: float
    flags: tuple = ()
    evaluations: int = 0


@dataclass(frozen=True)
class ThresholdResult:
    parameter: str
    critical: float
    bracket: tuple
    iterations: int
    attack: str
    flags: tuple = ()
    K_at_critical: float = float("nan")


# -------------------------------------------------------------- optimizers

def _maximize(f, lo: float, hi: float, log: bool) -> OptimizationResult:
    """Coarse grid followed by golden-section refinement around the best point."""
    if lo > hi:
        raise ValueError("empty bracket")
    if lo == hi:
        return OptimizationResult(lo, f(lo), (), 1)
    to_x = (lambda u: 10.0 ** u) if log else (lambda u: u)
    a, b = (math.log10(lo), math.log10(hi)) if log else (lo, hi)
    us = np.linspace(a, b, GRID_POINTS)
    us[0], us[-1] = a, b
    ks = np.array([f(to_x(u)) for u in us])
    n_eval = len(us)
    flags = []
    # pad with -inf so that maxima at the edges count as peaks
    padded = np.concatenate(([-np.inf], ks, [-np.inf]))
    peaks, _ = find_peaks(padded, prominence=REL_TOL)
    if len(peaks) > 1:
        flags.append(MULTIMODAL)
    i = int(np.argmax(ks))
    if i in (0, len(us) - 1):
        flags.append(EDGE)
        return OptimizationResult(to_x(us[i]), float(ks[i]), tuple(flags), n_eval)
    calls = [0]

    def neg(x):
        calls[0] += 1
        return -f(x)

    # scipy's golden search stops on a relative bracket width
    xs = [to_x(u) for u in us[i - 1:i + 2]]
    res = minimize_scalar(neg, bracket=tuple(xs), method="golden", options={"xtol": REL_TOL})
    x_best, k_best = (res.x, -res.fun) if -res.fun >= ks[i] else (xs[1], ks[i])
    return OptimizationResult(float(x_best), float(k_best), tuple(flags), n_eval + calls[0])


def optimize_modulation(scenario: Scenario, bounds: tuple = (1e-3, 1e3), attack: str = COLLECTIVE) -> OptimizationResult:
    """Maximize the key rate over V_M on a logarithmic bracket."""
    if scenario.protocol.modulation != OPTIMIZED:
        raise ScenarioError("modulation variance is fixed in standard mode")

    def f(v):
        return key_rate(scenario.replace(**{"protocol.V_M": v}), attack).key_rate
    return _maximize(f, bounds[0], bounds[1], log=True)


def optimize_monitor_weight(scenario: Scenario, bounds: tuple = (-10.0, 10.0), attack: str = COLLECTIVE) -> OptimizationResult:
    """Maximize the key rate over g' with g = 1 for a monitored interferometer."""
    sb = scenario.side_b
    if not sb.active:
        raise ScenarioError("no type-B side channel to weight")
    if not isinstance(sb.topology, Interferometer):
        raise ScenarioError("monitor-weight optimization applies to the interferometric coupling")

    def f(gp):
        s = scenario.replace(side_b=SideChannelB(sb.present, sb.topology, sb.V_N, Weighted(1.0, gp)))
        return key_rate(s, attack).key_rate
    return _maximize(f, bounds[0], bounds[1], log=False)


# ------------------------------------------------------------- thresholds

def _rate_fn(scenario: Scenario, attack: str, reoptimize: bool | None):
    if reoptimize is None:
        reoptimize = scenario.protocol.modulation == OPTIMIZED
    if reoptimize:
        return lambda s: optimize_modulation(s, attack=attack).K
    return lambda s: key_rate(s, attack).key_rate


def _bisect(k_of, name, lo, hi, attack, xtol=PARAM_TOL, ktol=K_TOL, max_iter=200) -> ThresholdResult:
    k_lo = k_of(lo)
    if k_lo <= 0:
        return ThresholdResult(name, lo, (lo, lo), 0, attack, (INSECURE_AT_ZERO,), k_lo)
    k_hi = k_of(hi)
    if k_hi > 0:
        return ThresholdResult(name, hi, (hi, hi), 0, attack, (BRACKET_EXHAUSTED,), k_hi)
    it = 0
    mid, k_mid = lo, k_lo
    while hi - lo > xtol and it < max_iter:
        it += 1
        mid = 0.5 * (lo + hi)
        k_mid = k_of(mid)
        if abs(k_mid) <= ktol:
            return ThresholdResult(name, mid, (lo, hi), it, attack, (), k_mid)
        if k_mid > 0:
            lo = mid
        else:
            hi = mid
    mid = 0.5 * (lo + hi)
    return ThresholdResult(name, mid, (lo, hi), it, attack, (), k_mid)


def find_eps_max(scenario: Scenario, attack: str = COLLECTIVE, bracket=(0.0, 10.0), reoptimize: bool | None = None) -> ThresholdResult:
    """Largest channel excess noise with a positive key rate."""
    if scenario.channel.eta >= 1:
        raise ScenarioError("excess-noise threshold needs eta < 1")
    rate = _rate_fn(scenario, attack, reoptimize)
    return _bisect(lambda e: rate(scenario.replace(**{"channel.eps": e})), "eps", bracket[0], bracket[1], attack)


def find_vn_max(scenario: Scenario, attack: str = COLLECTIVE, bracket=(1.0, 1e3), reoptimize: bool | None = None) -> ThresholdResult:
    """Largest type-B noise variance with a positive key rate."""
    if not scenario.side_b.present:
        raise ScenarioError("noise threshold needs a type-B side channel")
    rate = _rate_fn(scenario, attack, reoptimize)
    return _bisect(lambda v: rate(scenario.replace(**{"side_b.V_N": v})), "V_N", bracket[0], bracket[1], attack)


def _eta_at(scenario: Scenario, d: float) -> float:
    if scenario.channel.eps > 0:
        d = max(d, MIN_NOISY_DISTANCE_KM)
    return distance_to_transmittance(d)


def find_max_distance(scenario: Scenario, attack: str = COLLECTIVE, bracket=(0.0, 500.0), reoptimize: bool | None = None) -> ThresholdResult:
    """Largest fiber length (km, 0.2 dB/km) with a positive key rate."""
    rate = _rate_fn(scenario, attack, reoptimize)
    res = _bisect(lambda d: rate(scenario.replace(**{"channel.eta": _eta_at(scenario, d)})),
                  "distance_km", bracket[0], bracket[1], attack)
    if INSECURE_AT_ZERO in res.flags:
        raise ScenarioError("insecure at zero distance")
    return res


# ----------------------------------------------------------------- sweeps

@dataclass(frozen=True)
class SweepGrid:
    template: Scenario
    axes: tuple = ()

    def __post_init__(self):
        for ax in self.axes:
            if ax.steps < 1 or ax.lo > ax.hi:
                raise ValueError(f"invalid axis {ax.name}")
            # validates the parameter name against the scenario keys
            with_params(self.template, **{ax.name: ax.lo})

    def points(self) -> list[dict]:
        if not self.axes:
            return []
        names = [a.name for a in self.axes]
        return [dict(zip(names, vals)) for vals in itertools.product(*(a.values() for a in self.axes))]


@dataclass(frozen=True)
class SweepRecord:
    params: dict
    report: KeyRateReport | None = None
    error: str | None = None
    flags: tuple = field(default_factory=tuple)


def _evaluate_point(args) -> SweepRecord:
    template, changes, attack, optimize = args
    try:
        s = with_params(template, **changes)
        flags = ()
        if optimize and s.protocol.modulation == OPTIMIZED:
            opt = optimize_modulation(s, attack=attack)
            s = s.replace(**{"protocol.V_M": opt.x})
            flags = opt.flags
        report = key_rate(s, attack)
        params = flatten_scenario(s)
        if "channel.distance_km" in changes:
            params["channel.distance_km"] = changes["channel.distance_km"]
        return SweepRecord(params, report, None, tuple(report.flags) + flags)
    except (ScenarioError, ValueError, ArithmeticError) as e:
        params = flatten_scenario(template)
        params.update(changes)
        return SweepRecord(params, None, f"{type(e).__name__}: {e}")


def run_sweep(grid: SweepGrid, attack: str = COLLECTIVE, threads: int = 1, optimize_modulation: bool = False) -> list[SweepRecord]:
    """Evaluate the key rate at every grid point, first axis outermost."""
    tasks = [(grid.template, p, attack, optimize_modulation) for p in grid.points()]
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_evaluate_point, tasks, chunksize=max(1, len(tasks) // (4 * threads))))
    return [_evaluate_point(t) for t in tasks]
