"""Countermeasure settings and decoupling diagnostics for both side channels.

Bob's monitored variable is always dx = g x_B' - g' x_SCB'.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .scenario import (
    Scenario,
    ScenarioError,
    SideChannelB,
    Weighted,
    monitoring_weights_for,
    pm_statistics,
    propagate,
)


@dataclass(frozen=True)
class MonitoringWeights:
    g: float
    g_prime: float

    def __post_init__(self):
        if self.g == 0 and self.g_prime == 0:
            raise ScenarioError("monitoring weights are both zero")


@dataclass(frozen=True)
class DecouplingReport:
    mod_coeff_SCA: float = 0.0
    C_signal_SCA: float = 0.0
    residual_sideB_coeff: float = 0.0
    residual_sideB_p_coeff: float = 0.0


@dataclass(frozen=True)
class WeightedDifference:
    var_dx: float
    C_A_dx: float
    residual_x_coeff: float
    residual_p_coeff: float
    signal_coeff: float


def optimal_k(eta_A: float) -> float:
    """Modulation gain on the side-channel input that removes x_M from its output."""
    if not 0 < eta_A <= 1:
        raise ScenarioError("eta_A must lie in (0, 1]")
    return math.sqrt((1.0 - eta_A) / eta_A)


def monitoring_weights(side_b: SideChannelB) -> MonitoringWeights:
    """Weights (g, g') cancelling the injected noise in the weighted difference.

    For the interferometer the cancellation fixes g = 1 and g' = a / b. Raises
    NotFullyDecouplable for phi != 0.
    """
    if isinstance(side_b.monitoring, Weighted):
        side_b = SideChannelB(side_b.present, side_b.topology, side_b.V_N)
    g, gp = monitoring_weights_for(side_b)
    return MonitoringWeights(g, gp)


def _side_b_terms(bob, eta: float) -> tuple[float, float, float]:
    # x_N enters scaled by sqrt(eta) exactly like the channel output
    signal = bob.coeff("xN") / math.sqrt(eta)
    return bob.coeff("xSB"), bob.coeff("pSB"), signal


def weighted_difference_stats(scenario: Scenario, weights: MonitoringWeights) -> WeightedDifference:
    """Statistics of dx for the given weights, detectors included."""
    if not scenario.side_b.active:
        raise ScenarioError("weighted difference needs an active type-B side channel")
    sb = scenario.side_b
    s = scenario.replace(side_b=SideChannelB(sb.present, sb.topology, sb.V_N, Weighted(weights.g, weights.g_prime)))
    prop = propagate(s)
    rx, rp, sig = _side_b_terms(prop.bob, s.channel.eta)
    return WeightedDifference(prop.var(prop.bob), prop.cov(prop.alice, prop.bob), rx, rp, sig)


def decoupling_check(scenario: Scenario) -> DecouplingReport:
    a, b = scenario.side_channels
    if not (a or b):
        raise ScenarioError("no active side channel to check")
    out = {}
    if a:
        st = pm_statistics(scenario)
        out.update(mod_coeff_SCA=st.mod_coeff_SCA, C_signal_SCA=st.C_signal_SCA)
    if b:
        # without monitoring this is simply the noise coefficient at Bob
        rx, rp, _ = _side_b_terms(propagate(scenario).bob, scenario.channel.eta)
        out.update(residual_sideB_coeff=rx, residual_sideB_p_coeff=rp)
    return DecouplingReport(**out)
