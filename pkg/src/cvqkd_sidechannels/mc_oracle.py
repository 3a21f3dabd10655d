"""Monte Carlo quadrature-propagation oracle.

Samples every primitive quadrature and pushes the draws through the optical
layout with plain array arithmetic, independently of the analytic linear-form
propagation. Only second moments and Gaussian mutual information are
estimated.

Each sample block and each primitive variable gets its own substream spawned
from the run seed, and block sums are reduced with ``math.fsum``, so results
do not depend on how blocks are scheduled.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .individual import mutual_information
from .scenario import (
    CorrelatedModulation,
    Interferometer,
    PMStatistics,
    Scenario,
    UncorrelatedModulation,
    monitoring_weights_for,
    pm_statistics,
)

PRIMITIVES = ("xS", "pS", "xM", "pM", "xSA", "pSA", "xNM", "pNM", "xN", "pN", "x0", "p0", "xSB", "pSB", "x1", "x2")
MAX_BLOCKS = 64
MIN_BLOCK = 1000
Z_LIMIT = 5.0

# second moments accumulated per block
_PAIRS = {
    "AA": ("A", "A"), "BB": ("B", "B"), "AB": ("A", "B"),
    "OO": ("O", "O"), "SS": ("S", "S"), "SO": ("S", "O"), "OM": ("O", "M"), "MM": ("M", "M"),
}


@dataclass(frozen=True)
class SeededRun:
    seed: int = 1
    n_samples: int = 1_000_000
    threads: int = 1

    def __post_init__(self):
        if self.n_samples < 1000:
            raise ValueError("at least 1000 samples are required")


@dataclass(frozen=True)
class Estimate:
    value: float
    se: float


def _block_sizes(n: int) -> list[int]:
    k = max(1, min(MAX_BLOCKS, n // MIN_BLOCK))
    base, extra = divmod(n, k)
    return [base + (1 if i < extra else 0) for i in range(k)]


def _primitive_scales(s: Scenario) -> dict:
    pr, ch, sa, sb, det = s.protocol, s.channel, s.side_a, s.side_b, s.detector
    mp = pr.modulates_p
    vx, vp = sa.input_variances(pr) if sa.active else (1.0, 1.0)
    v_nm = sa.strategy.V_NM if sa.active and isinstance(sa.strategy, UncorrelatedModulation) else 0.0
    var = {
        "xS": pr.V_S, "pS": 1.0 / pr.V_S,
        "xM": pr.V_M, "pM": pr.V_M if mp else 0.0,
        "xSA": vx, "pSA": vp,
        "xNM": v_nm, "pNM": v_nm if mp else 0.0,
        "xN": ch.eps, "pN": ch.eps,
        "x0": 1.0, "p0": 1.0,
        "xSB": sb.V_N, "pSB": sb.V_N,
        "x1": det.V_D, "x2": det.V_D,
    }
    return {k: math.sqrt(v) for k, v in var.items()}


def _bs(xi, pi, xj, pj, T):
    t, r = math.sqrt(T), math.sqrt(1.0 - T)
    return t * xi + r * xj, t * pi + r * pj, t * xj - r * xi, t * pj - r * pi


def _sample_block(s: Scenario, seq: np.random.SeedSequence, size: int) -> dict:
    scales = _primitive_scales(s)
    d = {}
    for name, child in zip(PRIMITIVES, seq.spawn(len(PRIMITIVES))):
        d[name] = np.random.default_rng(child).standard_normal(size) * scales[name]
    sa, sb, ch, det = s.side_a, s.side_b, s.channel, s.detector

    x_a, p_a = d["xS"] + d["xM"], d["pS"] + d["pM"]
    alice = d["xM"].copy()
    side = np.zeros(size)
    if sa.active:
        x_in, p_in = d["xSA"], d["pSA"]
        if isinstance(sa.strategy, UncorrelatedModulation):
            x_in, p_in = x_in + d["xNM"], p_in + d["pNM"]
            alice = alice + d["xNM"]
        elif isinstance(sa.strategy, CorrelatedModulation):
            x_in, p_in = x_in + sa.strategy.k * d["xM"], p_in + sa.strategy.k * d["pM"]
        x_a, p_a, side, _ = _bs(x_a, p_a, x_in, p_in, sa.eta_A)
    signal = x_a

    t, r = math.sqrt(ch.eta), math.sqrt(1.0 - ch.eta)
    x_b = t * (x_a + d["xN"]) + r * d["x0"]
    p_b = t * (p_a + d["pN"]) + r * d["p0"]

    mon = None
    if sb.active:
        topo = sb.topology
        if isinstance(topo, Interferometer):
            xb, pb, xc, pc = _bs(x_b, p_b, d["xSB"], d["pSB"], topo.eta_B1)
            c, sn = math.cos(topo.phi), math.sin(topo.phi)
            xc, pc = c * xc + sn * pc, -sn * xc + c * pc
            x_b, _, mon, _ = _bs(xb, pb, xc, pc, topo.eta_B2)
        else:
            x_b, _, mon, _ = _bs(x_b, p_b, d["xSB"], d["pSB"], topo.eta_B)
    td, rd = math.sqrt(det.eta_D), math.sqrt(1.0 - det.eta_D)
    if det.eta_D < 1:
        x_b = td * x_b + rd * d["x1"]
    bob = x_b
    if sb.monitored:
        if det.eta_D < 1:
            mon = td * mon + rd * d["x2"]
        g, gp = monitoring_weights_for(sb)
        bob = g * x_b - gp * mon

    arrays = {"A": alice, "B": bob, "S": signal, "O": side, "M": d["xM"]}
    return {k: float(np.dot(arrays[a], arrays[b])) for k, (a, b) in _PAIRS.items()}


def _block_sums(s: Scenario, run: SeededRun) -> list[dict]:
    sizes = _block_sizes(run.n_samples)
    seqs = np.random.SeedSequence(run.seed).spawn(len(sizes))
    jobs = list(zip(seqs, sizes))
    if run.threads > 1:
        with ThreadPoolExecutor(max_workers=run.threads) as pool:
            return list(pool.map(lambda j: _sample_block(s, *j), jobs))
    return [_sample_block(s, *j) for j in jobs]


def _moments(blocks: list[dict], sizes: list[int], skip: int | None = None) -> dict:
    n = sum(sz for i, sz in enumerate(sizes) if i != skip)
    return {k: math.fsum(b[k] for i, b in enumerate(blocks) if i != skip) / n for k in _PAIRS}


def _cov_se(vx, vy, cxy, n):
    return math.sqrt(max(vx * vy + cxy * cxy, 0.0) / n)


def sample_statistics(scenario: Scenario, run: SeededRun) -> dict:
    """Empirical PMStatistics fields, each as an Estimate with its standard error."""
    return _statistics(_block_sums(scenario, run), run.n_samples)


def _statistics(blocks: list[dict], n: int) -> dict:
    m = _moments(blocks, _block_sizes(n))
    out = {
        "V_A": Estimate(m["AA"], m["AA"] * math.sqrt(2.0 / n)),
        "V_B": Estimate(m["BB"], m["BB"] * math.sqrt(2.0 / n)),
        "C_AB": Estimate(m["AB"], _cov_se(m["AA"], m["BB"], m["AB"], n)),
        "V_SCA_out": Estimate(m["OO"], m["OO"] * math.sqrt(2.0 / n)),
    }
    c_so = -m["SO"]
    out["C_signal_SCA"] = Estimate(c_so, _cov_se(m["OO"], m["SS"], c_so, n))
    if m["MM"] > 0:
        coef = m["OM"] / m["MM"]
        resid = max(m["OO"] - coef * m["OM"], 0.0)
        out["mod_coeff_SCA"] = Estimate(coef, math.sqrt(resid / (n * m["MM"])))
    else:
        out["mod_coeff_SCA"] = Estimate(0.0, 0.0)
    return out


def _mi(m: dict) -> float:
    return mutual_information(PMStatistics(m["AA"], m["BB"], m["AB"]))


def estimate_mutual_information(scenario: Scenario, run: SeededRun) -> Estimate:
    """Gaussian MI from the empirical covariance; delete-one-block jackknife SE."""
    return _mutual_information(_block_sums(scenario, run), run.n_samples)


def _mutual_information(blocks: list[dict], n: int) -> Estimate:
    sizes = _block_sizes(n)
    m = _moments(blocks, sizes)
    if m["AA"] <= 0 or m["BB"] <= 0:
        raise ValueError("degenerate empirical covariance")
    value = _mi(m)
    k = len(blocks)
    if k < 2:
        # delta method, floored at the O(1/n) bias of an uncorrelated estimate
        rho = abs(m["AB"]) / math.sqrt(m["AA"] * m["BB"])
        return Estimate(value, max(rho, 1.0 / math.sqrt(n)) / (math.log(2) * math.sqrt(n)))
    loo = [_mi(_moments(blocks, sizes, skip=i)) for i in range(k)]
    mean = math.fsum(loo) / k
    se = math.sqrt((k - 1) / k * math.fsum((v - mean) ** 2 for v in loo))
    return Estimate(value, se)


# ------------------------------------------------------------- validation

def _check(analytic: float, est: Estimate) -> dict:
    diff = est.value - analytic
    if est.se > 0:
        z = diff / est.se
        ok = abs(z) <= Z_LIMIT
    else:
        z = 0.0 if abs(diff) <= 1e-12 else math.inf
        ok = abs(diff) <= 1e-12
    return {"analytic": analytic, "empirical": est.value, "se": est.se, "z": z, "pass": ok}


def validate_scenario(scenario: Scenario, run: SeededRun, mi_target: float | None = None) -> dict:
    stats = pm_statistics(scenario)
    analytic = stats.as_dict()
    blocks = _block_sums(scenario, run)
    empirical = _statistics(blocks, run.n_samples)
    fields = {k: _check(analytic[k], empirical[k]) for k in analytic}
    if stats.V_A > 0:
        target = mutual_information(stats) if mi_target is None else mi_target
        fields["I_AB"] = _check(target, _mutual_information(blocks, run.n_samples))
    return {"fields": fields, "pass": all(f["pass"] for f in fields.values())}


def validation_report(scenarios: dict, run: SeededRun) -> dict:
    """Validation of named scenarios; JSON-serializable and deterministic."""
    results = {name: validate_scenario(s, run) for name, s in scenarios.items()}
    return {
        "seed": run.seed,
        "n_samples": run.n_samples,
        "z_limit": Z_LIMIT,
        "scenarios": results,
        "pass": all(r["pass"] for r in results.values()),
    }


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=True)


def canned_scenarios() -> dict:
    """Ten fixed scenarios covering every propagation branch."""
    from .countermeasures import optimal_k
    from .scenario import (
        COHERENT, SQUEEZED, STANDARD, ChannelParams, DetectorParams, Optimal, ProtocolParams,
        SideChannelA, SideChannelB, SingleCoupler, Thermal, Weighted,
    )

    sq = ProtocolParams(SQUEEZED, 0.1, STANDARD)
    coh = ProtocolParams(COHERENT, V_M=3.0)
    ch = ChannelParams(0.5, 0.0)
    return {
        "vacuum_only": Scenario(ProtocolParams(COHERENT, V_M=0.0), ChannelParams(1.0, 0.0)),
        "clean_coherent": Scenario(coh, ChannelParams(0.5, 0.1)),
        "typeA_vacuum": Scenario(sq, ch, SideChannelA(True, 0.9)),
        "typeA_thermal": Scenario(coh, ChannelParams(0.3, 0.05), SideChannelA(True, 0.6, Thermal(2.0))),
        "typeA_uncorrelated": Scenario(coh, ch, SideChannelA(True, 0.7, UncorrelatedModulation(2.0))),
        "typeA_correlated_matched": Scenario(sq, ch, SideChannelA(True, 0.4, CorrelatedModulation(optimal_k(0.4), "matched_squeezed"))),
        "typeB_single": Scenario(ProtocolParams(COHERENT, V_M=9.0), ch, side_b=SideChannelB(True, SingleCoupler(0.8), 1.5)),
        "typeB_monitored_detectors": Scenario(coh, ChannelParams(0.4, 0.05), side_b=SideChannelB(True, SingleCoupler(0.7), 1.2, Optimal()),
                                              detector=DetectorParams(0.6, 1.2)),
        "typeB_interferometer_phase": Scenario(sq, ChannelParams(0.1, 0.0),
                                               side_b=SideChannelB(True, Interferometer(0.9, 0.8, 1.5), 1.05, Weighted(1.0, 0.5))),
        "both_side_channels": Scenario(coh, ChannelParams(0.5, 0.02), SideChannelA(True, 0.8),
                                       SideChannelB(True, SingleCoupler(0.9), 1.1, Optimal())),
    }
