"""Shannon-information bounds and key rates under individual attacks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .scenario import (
    SQUEEZED,
    Interferometer,
    PMStatistics,
    Scenario,
    ScenarioError,
    pm_statistics,
    propagate,
)

INDIVIDUAL = "individual"
COLLECTIVE = "collective"


class Unsupported(ScenarioError):
    pass


@dataclass(frozen=True)
class KeyRateReport:
    I_AB: float
    eve_bound: float
    key_rate: float
    attack: str
    diagnostics: dict = field(default_factory=dict)
    flags: tuple = ()


def mutual_information(stats: PMStatistics) -> float:
    """Gaussian mutual information between Alice's and Bob's data, in bits."""
    if not (stats.V_A > 0 and stats.V_B > 0):
        raise ValueError("variances must be positive")
    if stats.C_AB == 0:
        return 0.0
    rho2 = stats.C_AB ** 2 / (stats.V_A * stats.V_B)
    if rho2 > 1 + 1e-12:
        raise ValueError("covariance violates Cauchy-Schwarz")
    # 1/(1-rho^2) written to keep precision at small correlation
    return -0.5 * math.log1p(-min(rho2, 1.0)) / math.log(2)


def conditional_variance(target_var: float, cross: np.ndarray, others: np.ndarray) -> float:
    """Var(Y | X) for jointly Gaussian Y and vector X."""
    if cross.size == 0:
        return target_var
    sol = np.linalg.lstsq(others, cross, rcond=1e-13)[0]
    return float(target_var - cross @ sol)


def eve_information_individual(scenario: Scenario) -> float:
    """I_BE when Eve homodynes x on every mode she holds.

    Eve's modes are the side-channel-A output, both entangling-cloner modes
    and the partner of the type-B noise mode.
    """
    a, b = scenario.side_channels
    if a and b:
        raise Unsupported("individual attacks with both side channels are not covered; use the collective engine")
    if b and isinstance(scenario.side_b.topology, Interferometer) and scenario.side_b.topology.phi != 0:
        raise Unsupported("phase-sensitive interferometric coupling needs the collective engine")
    prop = propagate(scenario, cloner=True)
    eve = list(prop.eve.values())
    v_b = prop.var(prop.bob)
    cross = np.array([prop.cov(prop.bob, e) for e in eve])
    gram = np.array([[prop.cov(e, f) for f in eve] for e in eve])
    v_cond = conditional_variance(v_b, cross, gram)
    if v_cond <= 0:
        raise ScenarioError("Eve's conditional variance is non-positive")
    return 0.5 * math.log2(v_b / v_cond)


def key_rate_individual(scenario: Scenario) -> KeyRateReport:
    """Perfect-reconciliation key rate I_AB - I_BE."""
    stats = pm_statistics(scenario)
    i_ab = mutual_information(stats)
    i_be = eve_information_individual(scenario)
    return KeyRateReport(i_ab, i_be, i_ab - i_be, INDIVIDUAL, {"V_B": stats.V_B, "C_AB": stats.C_AB})


# ------------------------------------------------------- closed-form limits

def asymptotic_key_rate(eta: float, eta_A: float, family: str) -> float:
    lam = 1.0 if family == SQUEEZED else 0.5
    return lam * math.log2(1.0 / (1.0 - eta_A * eta))


def eps_max_limit(eta_A: float, family: str) -> float:
    return eta_A if family == SQUEEZED else eta_A / 2.0


def vn_max_limit(eta_B: float) -> float:
    if eta_B >= 1:
        raise ValueError("no bound on the side-channel noise without coupling")
    return 1.0 / (1.0 - eta_B)


# reference closed forms, kept for regression

def typeA_mi_closed_form(eta_A, eta, V, V_M):
    x = eta_A * eta
    return 0.5 * math.log2(1.0 / (1.0 - x * V_M / (x * (V - 1) + 1)))


def typeA_eve_closed_form(eta_A, eta, V):
    x = eta_A * eta
    return 0.5 * math.log2((x * (V - 1) + 1) * (V - x * (V - 1)) / V)


def typeA_noisy_conditional_variance(eta_A, eta, eps, V):
    return (1 + eta_A * (V - 1)) / (1 + eta * eps + eta_A * (V - 1) * (1 - eta * (1 - eps)))


def typeB_mi_closed_form(eta_B, eta, V_N, V, V_M):
    d = eta_B * (eta * V + 1 - eta) + (1 - eta_B) * V_N
    return 0.5 * math.log2(1.0 / (1.0 - eta * eta_B * V_M / d))


def typeB_eve_closed_form(eta_B, eta, V_N, V):
    num = eta_B * (eta * V + 1 - eta) + (1 - eta_B) * V_N
    den = eta_B * V / (eta + (1 - eta) * V) + (1 - eta_B) / V_N
    return 0.5 * math.log2(num / den)
