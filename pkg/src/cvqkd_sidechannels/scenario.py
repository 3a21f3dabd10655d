"""Protocol configuration and prepare-and-measure statistics.

Every measured quantity is tracked as a linear form over independent
zero-mean Gaussian primitives (signal, modulation, vacuum and noise
quadratures), so variances and covariances come out exactly.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Union

SQUEEZED = "squeezed"
COHERENT = "coherent"
STANDARD = "standard"
OPTIMIZED = "optimized"


class ScenarioError(ValueError):
    pass


class NotFullyDecouplable(ScenarioError):
    """Optimal monitoring requested where no linear weighting removes the side channel."""


# ----------------------------------------------------------------- protocol

@dataclass(frozen=True)
class ProtocolParams:
    family: str = COHERENT
    V_S: float = 1.0
    modulation: str = OPTIMIZED
    V_M: float = 10.0
    beta: float = 0.95

    def __post_init__(self):
        if self.family not in (SQUEEZED, COHERENT):
            raise ScenarioError(f"unknown protocol family {self.family!r}")
        if self.modulation not in (STANDARD, OPTIMIZED):
            raise ScenarioError(f"unknown modulation mode {self.modulation!r}")
        if self.family == COHERENT:
            object.__setattr__(self, "V_S", 1.0)
        elif not 0 < self.V_S <= 1:
            raise ScenarioError("squeezed protocol needs 0 < V_S <= 1")
        if self.family == SQUEEZED and self.modulation == STANDARD:
            object.__setattr__(self, "V_M", 1.0 / self.V_S - self.V_S)
        if self.V_M < 0:
            raise ScenarioError("modulation variance must be non-negative")
        if not 0 < self.beta <= 1:
            raise ScenarioError("reconciliation efficiency must lie in (0, 1]")

    @property
    def lam(self) -> float:
        return 1.0 if self.family == SQUEEZED else 0.5

    @property
    def V(self) -> float:
        return self.V_S + self.V_M

    @property
    def modulates_p(self) -> bool:
        """The standard squeezed protocol displaces only the squeezed quadrature."""
        return not (self.family == SQUEEZED and self.modulation == STANDARD)

    @property
    def uses_epr_source(self) -> bool:
        """Ensemble is exactly the reduced state of EPR(V) measured by Alice."""
        return self.family == COHERENT or self.modulation == STANDARD


@dataclass(frozen=True)
class ChannelParams:
    eta: float = 1.0
    eps: float = 0.0

    def __post_init__(self):
        if not 0 < self.eta <= 1:
            raise ScenarioError("channel transmittance must lie in (0, 1]")
        if self.eps < 0:
            raise ScenarioError("excess noise must be non-negative")

    @property
    def cloner_variance(self) -> float:
        if self.eta >= 1:
            if self.eps > 0:
                raise ScenarioError("noisy lossless channel has no entangling-cloner model; use eta <= 1 - 1e-9")
            return 1.0
        return 1.0 + self.eta * self.eps / (1.0 - self.eta)


# ------------------------------------------------------------ side channel A

VACUUM_INPUT = "vacuum"
MATCHED_SQUEEZED = "matched_squeezed"


@dataclass(frozen=True)
class Vacuum:
    pass


@dataclass(frozen=True)
class Thermal:
    V_NS: float = 1.0

    def __post_init__(self):
        if self.V_NS < 1:
            raise ScenarioError("thermal side-channel input needs V_NS >= 1")


@dataclass(frozen=True)
class UncorrelatedModulation:
    V_NM: float = 0.0
    input: str = VACUUM_INPUT

    def __post_init__(self):
        if self.V_NM < 0:
            raise ScenarioError("V_NM must be non-negative")
        if self.input not in (VACUUM_INPUT, MATCHED_SQUEEZED):
            raise ScenarioError(f"unknown side-channel input {self.input!r}")


@dataclass(frozen=True)
class CorrelatedModulation:
    k: float = 0.0
    input: str = VACUUM_INPUT

    def __post_init__(self):
        if not math.isfinite(self.k):
            raise ScenarioError("k must be finite")
        if self.input not in (VACUUM_INPUT, MATCHED_SQUEEZED):
            raise ScenarioError(f"unknown side-channel input {self.input!r}")


InputStrategy = Union[Vacuum, Thermal, UncorrelatedModulation, CorrelatedModulation]


@dataclass(frozen=True)
class SideChannelA:
    present: bool = False
    eta_A: float = 1.0
    strategy: InputStrategy = field(default_factory=Vacuum)

    def __post_init__(self):
        if not 0 < self.eta_A <= 1:
            raise ScenarioError("eta_A must lie in (0, 1]")

    @property
    def active(self) -> bool:
        # a unit-transmittance coupler is no side channel at all
        return self.present and self.eta_A < 1

    def input_variances(self, protocol: ProtocolParams) -> tuple[float, float]:
        """(x, p) variances of the side-channel input before any displacement."""
        s = self.strategy
        if isinstance(s, Thermal):
            return s.V_NS, s.V_NS
        if getattr(s, "input", VACUUM_INPUT) == MATCHED_SQUEEZED:
            return protocol.V_S, 1.0 / protocol.V_S
        return 1.0, 1.0


# ------------------------------------------------------------ side channel B

@dataclass(frozen=True)
class SingleCoupler:
    eta_B: float = 1.0

    def __post_init__(self):
        if not 0 < self.eta_B <= 1:
            raise ScenarioError("eta_B must lie in (0, 1]")


@dataclass(frozen=True)
class Interferometer:
    eta_B1: float = 1.0
    eta_B2: float = 1.0
    phi: float = 0.0

    def __post_init__(self):
        for v in (self.eta_B1, self.eta_B2):
            if not 0 < v <= 1:
                raise ScenarioError("interferometer couplings must lie in (0, 1]")


@dataclass(frozen=True)
class Off:
    pass


@dataclass(frozen=True)
class Weighted:
    g: float = 1.0
    g_prime: float = 0.0

    def __post_init__(self):
        if self.g == 0 and self.g_prime == 0:
            raise ScenarioError("monitoring weights are both zero")


@dataclass(frozen=True)
class Optimal:
    pass


Topology = Union[SingleCoupler, Interferometer]
Monitoring = Union[Off, Weighted, Optimal]


@dataclass(frozen=True)
class SideChannelB:
    present: bool = False
    topology: Topology = field(default_factory=SingleCoupler)
    V_N: float = 1.0
    monitoring: Monitoring = field(default_factory=Off)

    def __post_init__(self):
        if self.V_N < 1:
            raise ScenarioError("side-channel noise needs V_N >= 1")

    @property
    def active(self) -> bool:
        t = self.topology
        if not self.present:
            return False
        if isinstance(t, SingleCoupler):
            return t.eta_B < 1
        return not (t.eta_B1 == 1 and t.eta_B2 == 1)

    @property
    def monitored(self) -> bool:
        return self.active and not isinstance(self.monitoring, Off)


@dataclass(frozen=True)
class DetectorParams:
    eta_D: float = 1.0
    V_D: float = 1.0

    def __post_init__(self):
        if not 0 < self.eta_D <= 1:
            raise ScenarioError("detector efficiency must lie in (0, 1]")
        if self.V_D < 1:
            raise ScenarioError("detector noise variance must be >= 1")

    @property
    def ideal(self) -> bool:
        return self.eta_D == 1


@dataclass(frozen=True)
class Scenario:
    protocol: ProtocolParams = field(default_factory=ProtocolParams)
    channel: ChannelParams = field(default_factory=ChannelParams)
    side_a: SideChannelA = field(default_factory=SideChannelA)
    side_b: SideChannelB = field(default_factory=SideChannelB)
    detector: DetectorParams = field(default_factory=DetectorParams)

    def replace(self, **changes) -> "Scenario":
        """Copy with dotted-path overrides, e.g. replace(**{"channel.eta": 0.1})."""
        s = self
        for path, value in changes.items():
            s = _replace_path(s, path.split("."), value)
        return s

    @property
    def side_channels(self) -> tuple[bool, bool]:
        return self.side_a.active, self.side_b.active


def _replace_path(obj, parts, value):
    if len(parts) == 1:
        return dataclasses.replace(obj, **{parts[0]: value})
    return dataclasses.replace(obj, **{parts[0]: _replace_path(getattr(obj, parts[0]), parts[1:], value)})


# ------------------------------------------------------------ linear forms

class Form(dict):
    """Linear combination of named primitive quadratures."""

    def __add__(self, other):
        out = Form(self)
        for k, v in other.items():
            out[k] = out.get(k, 0.0) + v
        return out

    def __sub__(self, other):
        return self + (-1.0) * other

    def __rmul__(self, c):
        return Form({k: c * v for k, v in self.items()})

    __mul__ = __rmul__

    def coeff(self, name) -> float:
        return self.get(name, 0.0)


def prim(name) -> Form:
    return Form({name: 1.0})


def covariance(f: Form, g: Form, variances: dict[str, float]) -> float:
    return math.fsum(c * g[k] * variances[k] for k, c in f.items() if k in g)


@dataclass(frozen=True)
class Propagation:
    """Linear forms of the key quadratures plus primitive variances."""
    variances: dict
    alice: Form
    signal: Form          # transmitted x quadrature after side channel A
    side_out: Form | None  # side-channel-A output x
    bob_main: Form        # main detector output x
    monitor: Form | None  # monitoring detector output x
    bob: Form             # Bob's key variable (weighted difference when monitoring)
    eve: dict             # Eve's accessible x quadratures (cloner view only)

    def var(self, f):
        return covariance(f, f, self.variances)

    def cov(self, f, g):
        return covariance(f, g, self.variances)


def _epr_pair(V, a_name, b_name) -> tuple[Form, Form]:
    """x quadratures of an EPR(V) pair as forms over two unit primitives."""
    root = math.sqrt(max(V * V - 1.0, 0.0))
    a, b = math.sqrt((V + root) / 2), math.sqrt((V - root) / 2)
    return Form({a_name: a, b_name: b}), Form({a_name: a, b_name: -b})


def monitoring_weights_for(side_b: SideChannelB) -> tuple[float, float]:
    mon = side_b.monitoring
    if isinstance(mon, Weighted):
        return mon.g, mon.g_prime
    t = side_b.topology
    if isinstance(t, SingleCoupler):
        return math.sqrt(t.eta_B), math.sqrt(1.0 - t.eta_B)
    if t.phi != 0:
        raise NotFullyDecouplable("interferometric coupling with phi != 0 cannot be fully decoupled; optimize g' numerically")
    e1, e2 = t.eta_B1, t.eta_B2
    a = math.sqrt(e2 * (1 - e1)) + math.sqrt(e1 * (1 - e2))
    b = math.sqrt(e1 * e2) - math.sqrt((1 - e1) * (1 - e2))
    if abs(b) < 1e-12:
        raise ScenarioError("singular interferometer (eta_B1 + eta_B2 = 1): signal fully routed to the monitor")
    return 1.0, a / b


def propagate(scenario: Scenario, cloner: bool = False) -> Propagation:
    """Propagate the measured x quadrature through the whole setup.

    With ``cloner=True`` the channel noise and the type-B noise are expressed
    through Eve's entangling-cloner modes, and her accessible quadratures are
    returned in ``eve``.
    """
    pr, ch, sa, sb, det = scenario.protocol, scenario.channel, scenario.side_a, scenario.side_b, scenario.detector
    var = {}
    mp = pr.modulates_p

    def new(name, v):
        var[name] = v
        return prim(name)

    xs, ps = new("xS", pr.V_S), new("pS", 1.0 / pr.V_S)
    xm = new("xM", pr.V_M)
    pm = new("pM", pr.V_M if mp else 0.0)
    x_a, p_a = xs + xm, ps + pm
    alice = Form(xm)
    eve = {}
    side_out = None

    if sa.active:
        s = sa.strategy
        vx, vp = sa.input_variances(pr)
        x_in, p_in = new("xSA", vx), new("pSA", vp)
        if isinstance(s, UncorrelatedModulation):
            x_in = x_in + new("xNM", s.V_NM)
            p_in = p_in + new("pNM", s.V_NM if mp else 0.0)
            alice = alice + prim("xNM")
        elif isinstance(s, CorrelatedModulation):
            x_in = x_in + s.k * xm
            p_in = p_in + s.k * pm
        t, r = math.sqrt(sa.eta_A), math.sqrt(1.0 - sa.eta_A)
        x_a, p_a, side_out = t * x_a + r * x_in, t * p_a + r * p_in, t * x_in - r * x_a
        eve["side_a"] = side_out
    signal = x_a

    # main channel
    t, r = math.sqrt(ch.eta), math.sqrt(1.0 - ch.eta)
    if cloner:
        N = ch.cloner_variance
        e1_in, e2 = _epr_pair(N, "u1", "u2")
        var["u1"] = var["u2"] = 1.0
        x_b = t * x_a + r * e1_in
        eve["E1"] = t * e1_in - r * x_a
        eve["E2"] = e2
        p_b = None
    else:
        x_b = t * (x_a + new("xN", ch.eps)) + r * new("x0", 1.0)
        p_b = t * (p_a + new("pN", ch.eps)) + r * new("p0", 1.0)

    monitor = None
    if sb.active:
        if cloner:
            x_sc, e_n = _epr_pair(sb.V_N, "v1", "v2")
            var["v1"] = var["v2"] = 1.0
            eve["EN"] = e_n
            p_sc = None
        else:
            x_sc, p_sc = new("xSB", sb.V_N), new("pSB", sb.V_N)
        topo = sb.topology
        if isinstance(topo, SingleCoupler):
            tb, rb = math.sqrt(topo.eta_B), math.sqrt(1.0 - topo.eta_B)
            x_main, x_mon = tb * x_b + rb * x_sc, tb * x_sc - rb * x_b
        else:
            e1, e2, phi = topo.eta_B1, topo.eta_B2, topo.phi
            c, s_ = math.cos(phi), math.sin(phi)
            if s_ != 0 and p_b is None:
                raise ScenarioError("phase-sensitive interferometer is unsupported in the x-only cloner view")
            x_main = ((math.sqrt(e1 * e2) - c * math.sqrt((1 - e1) * (1 - e2))) * x_b
                      + (math.sqrt(e2 * (1 - e1)) + c * math.sqrt(e1 * (1 - e2))) * x_sc)
            x_mon = ((-math.sqrt(e1 * (1 - e2)) - c * math.sqrt(e2 * (1 - e1))) * x_b
                     + (c * math.sqrt(e1 * e2) - math.sqrt((1 - e1) * (1 - e2))) * x_sc)
            if s_ != 0:
                x_main = x_main + (-s_ * math.sqrt((1 - e1) * (1 - e2))) * p_b + (s_ * math.sqrt(e1 * (1 - e2))) * p_sc
                x_mon = x_mon + (-s_ * math.sqrt(e2 * (1 - e1))) * p_b + (s_ * math.sqrt(e1 * e2)) * p_sc
    else:
        x_main = x_b
        x_mon = None

    td, rd = math.sqrt(det.eta_D), math.sqrt(1.0 - det.eta_D)
    if det.eta_D < 1:
        x_main = td * x_main + rd * new("x1", det.V_D)
    bob = x_main
    if sb.monitored:
        if det.eta_D < 1:
            x_mon = td * x_mon + rd * new("x2", det.V_D)
        monitor = x_mon
        g, gp = monitoring_weights_for(sb)
        bob = g * x_main - gp * x_mon

    var = {k: v for k, v in var.items()}
    return Propagation(var, alice, signal, side_out, x_main, monitor, bob, eve)


# --------------------------------------------------------------- statistics

@dataclass(frozen=True)
class PMStatistics:
    V_A: float
    V_B: float
    C_AB: float
    V_SCA_out: float = 0.0
    C_signal_SCA: float = 0.0
    mod_coeff_SCA: float = 0.0

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def pm_statistics(scenario: Scenario) -> PMStatistics:
    """Exact prepare-and-measure second moments of Alice's and Bob's data.

    ``C_signal_SCA`` uses the sign convention in which it equals
    sqrt(eta_A (1 - eta_A)) (V_S - V_in) for an unmodulated input, i.e. it is
    the covariance of the transmitted quadrature with the negated side output.
    """
    prop = propagate(scenario)
    extra = {}
    if prop.side_out is not None:
        extra = dict(
            V_SCA_out=prop.var(prop.side_out),
            C_signal_SCA=-prop.cov(prop.signal, prop.side_out),
            mod_coeff_SCA=prop.side_out.coeff("xM"),
        )
    return PMStatistics(
        V_A=prop.var(prop.alice),
        V_B=prop.var(prop.bob),
        C_AB=prop.cov(prop.alice, prop.bob),
        **extra,
    )
