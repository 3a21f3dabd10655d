"""Holevo bound under collective attacks.

Two independent constructions are provided:

* ``holevo_bound`` purifies the prepare-and-measure ensemble on the trusted
  side (EPR sources, trusted noise purifications, near-unity couplers that
  inject classical displacements) and evaluates S(trusted) - S(trusted | x_B).
* ``entangling_cloner_holevo`` builds Eve's modes explicitly (side-channel
  output, cloner modes, partner of the injected noise) with the modulation
  treated as classical noise, and evaluates S(E) - S(E | x_B).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import gaussian as gs
from .gaussian import CovarianceMatrix
from .individual import COLLECTIVE, KeyRateReport, mutual_information
from .scenario import (
    COHERENT,
    CorrelatedModulation,
    Interferometer,
    Scenario,
    ScenarioError,
    SingleCoupler,
    Thermal,
    UncorrelatedModulation,
    monitoring_weights_for,
    pm_statistics,
)

NO_PAPER_FIXTURE = "no_paper_fixture"


@dataclass(frozen=True)
class PurificationConfig:
    """Finite stand-ins for the ideal limits of the purification schemes.

    T1 is the transmittance of the couplers that inject classical
    displacements, V0 the squeezing of the state emulating Alice's detection.
    """
    T1: float = 1.0 - 1e-6
    V0: float = 1e-6

    def __post_init__(self):
        if not 0 < 1 - self.T1 <= 1e-4:
            raise ScenarioError("T1 must satisfy 0 < 1 - T1 <= 1e-4")
        if not 0 < self.V0 <= 1e-4:
            raise ScenarioError("V0 must satisfy 0 < V0 <= 1e-4")

    def halved(self) -> "PurificationConfig":
        return PurificationConfig(1 - (1 - self.T1) / 2, self.V0 / 2)


@dataclass(frozen=True)
class PurifiedState:
    state: CovarianceMatrix
    labels: tuple
    trusted_modes: tuple
    bob_mode: int
    eve_modes: tuple = ()
    alice_modes: dict = field(default_factory=dict)

    def mode(self, label) -> int:
        return self.labels.index(label)


class _Modes:
    """Labelled mode register for building multimode states step by step."""

    def __init__(self):
        self.state: CovarianceMatrix | None = None
        self.labels: list[str] = []

    def add(self, cov: CovarianceMatrix, *labels):
        assert cov.n_modes == len(labels)
        self.state = cov if self.state is None else gs.direct_sum(self.state, cov)
        self.labels.extend(labels)

    def __getitem__(self, label) -> int:
        return self.labels.index(label)

    def __contains__(self, label):
        return label in self.labels

    def bs(self, a, b, T):
        self.state = gs.apply_beamsplitter(self.state, self[a], self[b], T)

    def phase(self, a, phi):
        self.state = gs.apply_phase(self.state, self[a], phi)

    def channel(self, a, eta, noise):
        self.state = gs.apply_gaussian_channel(self.state, self[a], eta, noise)

    def combine(self, a, b, wa, wb):
        """Rotate so that x of mode a becomes (wa x_a + wb x_b) / norm."""
        if wa < 0:
            wa, wb = -wa, -wb
        if wb < 0:
            self.phase(b, math.pi)
            wb = -wb
        self.bs(a, b, wa * wa / (wa * wa + wb * wb))


def _couple_side_b(m: _Modes, scenario: Scenario):
    topo = scenario.side_b.topology
    if isinstance(topo, SingleCoupler):
        m.bs("B", "C", topo.eta_B)
    else:
        m.bs("B", "C", topo.eta_B1)
        m.phase("C", topo.phi)
        m.bs("B", "C", topo.eta_B2)


def _correlated_coefficients(scenario: Scenario) -> tuple[float, float]:
    """x_M coefficients on the transmitted mode and on the side output."""
    eta_A = scenario.side_a.eta_A
    k = scenario.side_a.strategy.k
    t, r = math.sqrt(eta_A), math.sqrt(1 - eta_A)
    return t + k * r, k * t - r


def _inject(m: _Modes, targets: dict, V: float, modulate_p: bool, cfg: PurificationConfig, tag: str):
    """Add a classical displacement of variance c^2 V to each target mode.

    A two-mode source M/N with marginal variance W/(1-T1) feeds the targets
    through couplers of transmittance T1; N drives Alice's emulated detection.
    All auxiliary outputs stay trusted.
    """
    targets = {k: c for k, c in targets.items() if c != 0}
    if not targets or V == 0:
        return
    W = V * sum(c * c for c in targets.values())
    X = W / (1 - cfg.T1)
    m.add(gs.two_squeezer_state(X, X if modulate_p else 1.0), f"{tag}_M", f"{tag}_N")
    m.add(gs.squeezed_state(cfg.V0), f"{tag}_A")
    m.bs(f"{tag}_A", f"{tag}_N", cfg.T1)
    (first, c1), *rest = targets.items()
    feeds = [(first, f"{tag}_M", c1)]
    if rest:
        (second, c2), = rest
        m.add(gs.vacuum(1), f"{tag}_M2")
        m.bs(f"{tag}_M", f"{tag}_M2", c1 * c1 / (c1 * c1 + c2 * c2))
        # after the split M carries +|c1|, M2 carries -|c2|
        if c2 > 0:
            m.phase(f"{tag}_M2", math.pi)
        feeds.append((second, f"{tag}_M2", c2))
    if c1 < 0:
        m.phase(f"{tag}_M", math.pi)
    for target, source, _ in feeds:
        m.bs(target, source, cfg.T1)


def build_purification(scenario: Scenario, config: PurificationConfig | None = None) -> PurifiedState:
    cfg = config or PurificationConfig()
    pr, ch, sa, sb, det = scenario.protocol, scenario.channel, scenario.side_a, scenario.side_b, scenario.detector
    m = _Modes()
    correlated = sa.active and isinstance(sa.strategy, CorrelatedModulation)
    alice = {}
    if pr.uses_epr_source and not correlated:
        m.add(gs.epr_state(pr.V), "A", "B")
        alice["A"] = "heterodyne" if pr.family == COHERENT else "homodyne"
    else:
        m.add(gs.squeezed_state(pr.V_S), "B")
        if not correlated:
            _inject(m, {"B": 1.0}, pr.V_M, pr.modulates_p, cfg, "mod")
            if "mod_A" in m:
                alice["mod_A"] = "homodyne"

    eve = []
    if sa.active:
        s = sa.strategy
        if isinstance(s, Thermal):
            m.add(gs.epr_state(s.V_NS), "SA", "SA_purifier")
        else:
            vx, _ = sa.input_variances(pr)
            m.add(gs.squeezed_state(vx), "SA")
        if isinstance(s, UncorrelatedModulation):
            _inject(m, {"SA": 1.0}, s.V_NM, pr.modulates_p, cfg, "nm")
        m.bs("B", "SA", sa.eta_A)
        if correlated:
            c_sig, c_side = _correlated_coefficients(scenario)
            _inject(m, {"B": c_sig, "SA": c_side}, pr.V_M, pr.modulates_p, cfg, "mod")
            if "mod_A" in m:
                alice["mod_A"] = "homodyne"
        eve.append("SA")

    if ch.eta < 1:
        m.add(gs.epr_state(ch.cloner_variance), "E1", "E2")
        m.bs("B", "E1", ch.eta)
        eve += ["E1", "E2"]
    elif ch.eps > 0:
        raise ScenarioError("a lossless channel cannot add excess noise")

    if sb.active:
        # the noise mode is purified by Eve
        m.add(gs.epr_state(sb.V_N), "C", "EN")
        _couple_side_b(m, scenario)
        eve.append("EN")
    _detect(m, scenario, purify=True)
    if sb.monitored:
        g, gp = monitoring_weights_for(sb)
        m.combine("B", "C", g, -gp)

    labels = tuple(m.labels)
    trusted = tuple(i for i, lab in enumerate(labels) if lab not in eve)
    return PurifiedState(m.state, labels, trusted, labels.index("B"), tuple(labels.index(e) for e in eve),
                         {labels.index(k): v for k, v in alice.items()})


def _detect(m: _Modes, scenario: Scenario, purify: bool):
    det = scenario.detector
    if det.eta_D >= 1:
        return
    targets = ["B"] + (["C"] if scenario.side_b.active else [])
    for k, target in enumerate(targets):
        if purify:
            if det.V_D > 1:
                m.add(gs.epr_state(det.V_D), f"D{k}", f"D{k}_purifier")
            else:
                m.add(gs.vacuum(1), f"D{k}")
            m.bs(target, f"D{k}", det.eta_D)
        else:
            m.channel(target, det.eta_D, (1 - det.eta_D) * (det.V_D - 1) / det.eta_D)


def _holevo(state: CovarianceMatrix, bob_pos: int) -> float:
    if state.n_modes == 1:
        return 0.0
    s_all = gs.von_neumann_entropy(state)
    s_cond = gs.von_neumann_entropy(gs.condition_on_homodyne(state, bob_pos, "x"))
    return s_all - s_cond


def holevo_bound(scenario: Scenario, config: PurificationConfig | None = None) -> float:
    """S(trusted) - S(trusted | x_B), evaluated on the purifying side.

    The global state is pure, so both entropies equal those of Eve's modes.
    The trusted block carries variances of order V_M/(1-T1), whose symplectic
    spectrum cannot be resolved in double precision; Eve's block stays at
    ordinary scales.
    """
    p = build_purification(scenario, config)
    return _eve_side_holevo(p)


def trusted_side_holevo(scenario: Scenario, config: PurificationConfig | None = None) -> float:
    """The same quantity computed on the trusted modes directly.

    Accurate only when no classical displacement is injected.
    """
    p = build_purification(scenario, config)
    trusted = p.state.submatrix(p.trusted_modes)
    return _holevo(trusted, p.trusted_modes.index(p.bob_mode))


def _eve_side_holevo(p: PurifiedState) -> float:
    if not p.eve_modes:
        return 0.0
    sub = p.state.submatrix(list(p.eve_modes) + [p.bob_mode])
    s_eve = gs.von_neumann_entropy(sub.submatrix(range(len(p.eve_modes))))
    s_cond = gs.von_neumann_entropy(gs.condition_on_homodyne(sub, len(p.eve_modes), "x"))
    return max(s_eve - s_cond, 0.0)


def cloner_state(scenario: Scenario) -> PurifiedState:
    """Eve's modes plus Bob's mode, with the modulation as classical noise."""
    pr, ch, sa, sb = scenario.protocol, scenario.channel, scenario.side_a, scenario.side_b
    mp = 1.0 if pr.modulates_p else 0.0
    m = _Modes()

    if sa.active:
        s = sa.strategy
        vx, vp = sa.input_variances(pr)
        cov = np.diag([pr.V_S + pr.V_M, 1 / pr.V_S + mp * pr.V_M, vx, vp])
        if isinstance(s, UncorrelatedModulation):
            cov[2, 2] += s.V_NM
            cov[3, 3] += mp * s.V_NM
        elif isinstance(s, CorrelatedModulation):
            v = np.array([1.0, s.k])
            cov[0, 0] -= pr.V_M
            cov[1, 1] -= mp * pr.V_M
            cov[np.ix_([0, 2], [0, 2])] += pr.V_M * np.outer(v, v)
            cov[np.ix_([1, 3], [1, 3])] += mp * pr.V_M * np.outer(v, v)
        m.add(CovarianceMatrix(cov), "B", "SA")
        m.bs("B", "SA", sa.eta_A)
        eve = ["SA"]
    else:
        m.add(CovarianceMatrix(np.diag([pr.V_S + pr.V_M, 1 / pr.V_S + mp * pr.V_M])), "B")
        eve = []

    N = ch.cloner_variance
    if ch.eta < 1:
        m.add(gs.epr_state(N), "E1", "E2")
        m.bs("B", "E1", ch.eta)
        eve += ["E1", "E2"]

    if sb.active:
        m.add(gs.epr_state(sb.V_N), "C", "EN")
        _couple_side_b(m, scenario)
        eve.append("EN")
    _detect(m, scenario, purify=False)
    if sb.monitored:
        g, gp = monitoring_weights_for(sb)
        m.combine("B", "C", g, -gp)
    labels = tuple(m.labels)
    return PurifiedState(m.state, labels, (), labels.index("B"), tuple(labels.index(e) for e in eve))


def entangling_cloner_holevo(scenario: Scenario) -> float:
    return _eve_side_holevo(cloner_state(scenario))


def key_rate_collective(scenario: Scenario, config: PurificationConfig | None = None) -> KeyRateReport:
    stats = pm_statistics(scenario)
    i_ab = mutual_information(stats)
    chi = holevo_bound(scenario, config)
    flags = (NO_PAPER_FIXTURE,) if all(scenario.side_channels) else ()
    return KeyRateReport(
        I_AB=i_ab,
        eve_bound=chi,
        key_rate=scenario.protocol.beta * i_ab - chi,
        attack=COLLECTIVE,
        diagnostics={"V_B": stats.V_B, "C_AB": stats.C_AB},
        flags=flags,
    )


def purification_mutual_information(scenario: Scenario, config: PurificationConfig | None = None) -> float:
    """I_AB read off the purified state by emulating Alice's detection.

    Only defined where Alice's data sits in a single emulated detector mode.
    """
    p = build_purification(scenario, config)
    if len(p.alice_modes) != 1:
        raise ScenarioError("Alice's data is spread over several emulated detectors")
    (a, kind), = p.alice_modes.items()
    st = p.state.submatrix([a, p.bob_mode])
    if kind == "heterodyne":
        st = gs.apply_beamsplitter(gs.direct_sum(st, gs.vacuum(1)), 0, 2, 0.5)
    m = st.matrix
    va, vb, c = m[0, 0], m[2, 2], m[0, 2]
    return -0.5 * math.log2(1 - c * c / (va * vb))
