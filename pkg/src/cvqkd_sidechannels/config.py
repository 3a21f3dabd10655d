"""Flat ``key = value`` run configuration and its mapping onto Scenario.

Keys use dotted namespaces (``channel.eta``, ``side_b.V_N``); ``#`` starts a
comment. Validation collects every problem before reporting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .countermeasures import optimal_k
from .scenario import (
    CorrelatedModulation,
    ChannelParams,
    DetectorParams,
    Interferometer,
    Off,
    Optimal,
    ProtocolParams,
    Scenario,
    ScenarioError,
    SideChannelA,
    SideChannelB,
    SingleCoupler,
    Thermal,
    UncorrelatedModulation,
    Vacuum,
    Weighted,
)


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


def distance_to_transmittance(d: float) -> float:
    """Fiber transmittance at 0.2 dB/km."""
    if not d >= 0:
        raise ScenarioError("distance must be non-negative")
    return 10.0 ** (-0.02 * d)


def transmittance_to_distance(eta: float) -> float:
    if not 0 < eta <= 1:
        raise ScenarioError("transmittance must lie in (0, 1]")
    return -50.0 * math.log10(eta)


def _bool(s):
    v = s.lower()
    if v in ("true", "yes", "1"):
        return True
    if v in ("false", "no", "0"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _choice(*options):
    def parse(s):
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {s!r}")
        return s
    return parse


def _k(s):
    return s if s == "optimal" else float(s)


# key -> (parser, default); None means no default
SCENARIO_KEYS = {
    "protocol.family": (_choice("coherent", "squeezed"), "coherent"),
    "protocol.V_S": (float, 1.0),
    "protocol.modulation": (_choice("standard", "optimized"), "optimized"),
    "protocol.V_M": (float, 10.0),
    "protocol.beta": (float, 0.95),
    "channel.eta": (float, 1.0),
    "channel.distance_km": (float, None),
    "channel.eps": (float, 0.0),
    "side_a.present": (_bool, None),
    "side_a.eta_A": (float, 1.0),
    "side_a.strategy": (_choice("vacuum", "thermal", "uncorrelated_modulation", "correlated_modulation"), "vacuum"),
    "side_a.V_NS": (float, 1.0),
    "side_a.V_NM": (float, 0.0),
    "side_a.k": (_k, "optimal"),
    "side_a.input": (_choice("vacuum", "matched_squeezed"), "vacuum"),
    "side_b.present": (_bool, None),
    "side_b.topology": (_choice("single", "interferometer"), "single"),
    "side_b.eta_B": (float, 1.0),
    "side_b.eta_B1": (float, 1.0),
    "side_b.eta_B2": (float, 1.0),
    "side_b.phi": (float, None),
    "side_b.V_N": (float, 1.0),
    "side_b.monitoring": (_choice("off", "weighted", "optimal"), "off"),
    "side_b.g": (float, 1.0),
    "side_b.g_prime": (float, 0.0),
    "detector.eta_D": (float, 1.0),
    "detector.V_D": (float, 1.0),
}

OPTION_KEYS = {
    "run.attack": (_choice("individual", "collective"), "collective"),
    "run.format": (_choice("csv", "json"), "csv"),
    "run.seed": (int, 1),
    "run.samples": (int, 1_000_000),
    "run.threads": (int, 1),
    "threshold.parameter": (_choice("eps", "V_N", "distance"), "eps"),
    "optimize.target": (_choice("modulation", "monitor_weight"), "modulation"),
    "sweep.optimize_modulation": (_bool, False),
}

AXIS_PREFIX = "sweep.axis."


@dataclass(frozen=True)
class Axis:
    name: str
    lo: float
    hi: float
    steps: int
    scale: str = "linear"

    def values(self) -> list[float]:
        if self.steps == 1:
            return [self.lo]
        if self.scale == "log":
            a, b = math.log10(self.lo), math.log10(self.hi)
            return [10.0 ** (a + (b - a) * i / (self.steps - 1)) for i in range(self.steps)]
        return [self.lo + (self.hi - self.lo) * i / (self.steps - 1) for i in range(self.steps)]


@dataclass(frozen=True)
class RunConfig:
    scenario: Scenario
    params: dict
    options: dict
    axes: tuple = ()
    explicit: frozenset = field(default_factory=frozenset)


def _parse_axis(name, text):
    parts = text.split()
    if len(parts) not in (3, 4):
        raise ValueError("axis needs 'min max steps [linear|log]'")
    lo, hi, steps = float(parts[0]), float(parts[1]), int(parts[2])
    scale = parts[3] if len(parts) == 4 else "linear"
    if scale not in ("linear", "log"):
        raise ValueError(f"axis scale must be linear or log, got {scale!r}")
    if steps < 1:
        raise ValueError("axis needs at least one step")
    if lo > hi:
        raise ValueError("axis minimum exceeds maximum")
    if scale == "log" and lo <= 0:
        raise ValueError("log axis needs a positive minimum")
    if name not in SCENARIO_KEYS or name in ("side_a.present", "side_b.present"):
        raise ValueError(f"cannot sweep {name!r}")
    return Axis(name, lo, hi, steps, scale)


def parse_config(text: str) -> RunConfig:
    errors = []
    seen = {}
    raw = {}
    axes = []
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            errors.append(f"line {lineno}: syntax error, expected 'key = value'")
            continue
        key, value = (s.strip() for s in body.split("=", 1))
        if not key or not value:
            errors.append(f"line {lineno}: syntax error, empty key or value")
            continue
        if key in seen:
            errors.append(f"{key}: duplicate key on lines {seen[key]} and {lineno}")
            continue
        seen[key] = lineno
        if key.startswith(AXIS_PREFIX):
            try:
                axes.append(_parse_axis(key[len(AXIS_PREFIX):], value))
            except ValueError as e:
                errors.append(f"{key} (line {lineno}): {e}")
            continue
        spec = SCENARIO_KEYS.get(key) or OPTION_KEYS.get(key)
        if spec is None:
            errors.append(f"{key} (line {lineno}): unknown key")
            continue
        try:
            raw[key] = spec[0](value)
        except ValueError as e:
            errors.append(f"{key} (line {lineno}): {e}")
    params = {k: v for k, v in raw.items() if k in SCENARIO_KEYS}
    options = {k: raw.get(k, d) for k, (_, d) in OPTION_KEYS.items()}
    try:
        scenario = scenario_from_params(params)
    except ConfigError as e:
        errors += e.errors
    if errors:
        raise ConfigError(errors)
    return RunConfig(scenario, flatten_scenario(scenario), options, tuple(axes), frozenset(raw))


def _namespace_given(params, ns):
    return any(k.startswith(ns + ".") and k != ns + ".present" for k in params)


def scenario_from_params(params: dict) -> Scenario:
    """Build a Scenario from flat keys, collecting every validation error."""
    errors = []
    unknown = sorted(set(params) - set(SCENARIO_KEYS))
    errors += [f"{k}: unknown key" for k in unknown]

    def get(key):
        v = params.get(key)
        return SCENARIO_KEYS[key][1] if v is None else v

    def build(label, fn):
        try:
            return fn()
        except (ScenarioError, ValueError) as e:
            errors.append(f"{label}: {e}")
            return None

    protocol = build("protocol", lambda: ProtocolParams(
        get("protocol.family"), get("protocol.V_S"), get("protocol.modulation"), get("protocol.V_M"), get("protocol.beta")))

    if "channel.eta" in params and "channel.distance_km" in params:
        errors.append("channel.distance_km: conflicts with channel.eta; give only one")
    eta = get("channel.eta")
    if "channel.distance_km" in params:
        eta = build("channel.distance_km", lambda: distance_to_transmittance(params["channel.distance_km"]))
    channel = build("channel", lambda: ChannelParams(eta, get("channel.eps")))

    present_a = params.get("side_a.present")
    if present_a is None:
        present_a = _namespace_given(params, "side_a")

    def side_a():
        strategy = get("side_a.strategy")
        eta_A = get("side_a.eta_A")
        if strategy == "vacuum":
            s = Vacuum()
        elif strategy == "thermal":
            s = Thermal(get("side_a.V_NS"))
        elif strategy == "uncorrelated_modulation":
            s = UncorrelatedModulation(get("side_a.V_NM"), get("side_a.input"))
        else:
            k = get("side_a.k")
            s = CorrelatedModulation(optimal_k(eta_A) if k == "optimal" else k, get("side_a.input"))
        return SideChannelA(present_a, eta_A, s)
    sa = build("side_a", side_a)

    present_b = params.get("side_b.present")
    if present_b is None:
        present_b = _namespace_given(params, "side_b")

    def side_b():
        if get("side_b.topology") == "single":
            topo = SingleCoupler(get("side_b.eta_B"))
        else:
            if params.get("side_b.phi") is None:
                raise ScenarioError("side_b.phi is required for the interferometer topology")
            topo = Interferometer(get("side_b.eta_B1"), get("side_b.eta_B2"), params["side_b.phi"])
        mon = get("side_b.monitoring")
        monitoring = {"off": Off, "optimal": Optimal}.get(mon)
        monitoring = monitoring() if monitoring else Weighted(get("side_b.g"), get("side_b.g_prime"))
        return SideChannelB(present_b, topo, get("side_b.V_N"), monitoring)
    sb = build("side_b", side_b)

    detector = build("detector", lambda: DetectorParams(get("detector.eta_D"), get("detector.V_D")))
    if errors:
        raise ConfigError(errors)
    return Scenario(protocol, channel, sa, sb, detector)


def flatten_scenario(s: Scenario) -> dict:
    """Flat keys describing the scenario, restricted to the ones in use."""
    pr, ch = s.protocol, s.channel
    out = {
        "protocol.family": pr.family,
        "protocol.V_S": pr.V_S,
        "protocol.modulation": pr.modulation,
        "protocol.V_M": pr.V_M,
        "protocol.beta": pr.beta,
        "channel.eta": ch.eta,
        "channel.distance_km": transmittance_to_distance(ch.eta),
        "channel.eps": ch.eps,
        "side_a.present": s.side_a.present,
        "side_b.present": s.side_b.present,
        "detector.eta_D": s.detector.eta_D,
        "detector.V_D": s.detector.V_D,
    }
    if s.side_a.present:
        st = s.side_a.strategy
        out["side_a.eta_A"] = s.side_a.eta_A
        if isinstance(st, Vacuum):
            out["side_a.strategy"] = "vacuum"
        elif isinstance(st, Thermal):
            out.update({"side_a.strategy": "thermal", "side_a.V_NS": st.V_NS})
        elif isinstance(st, UncorrelatedModulation):
            out.update({"side_a.strategy": "uncorrelated_modulation", "side_a.V_NM": st.V_NM, "side_a.input": st.input})
        else:
            out.update({"side_a.strategy": "correlated_modulation", "side_a.k": st.k, "side_a.input": st.input})
    if s.side_b.present:
        sb = s.side_b
        if isinstance(sb.topology, SingleCoupler):
            out.update({"side_b.topology": "single", "side_b.eta_B": sb.topology.eta_B})
        else:
            t = sb.topology
            out.update({"side_b.topology": "interferometer", "side_b.eta_B1": t.eta_B1,
                        "side_b.eta_B2": t.eta_B2, "side_b.phi": t.phi})
        out["side_b.V_N"] = sb.V_N
        if isinstance(sb.monitoring, Weighted):
            out.update({"side_b.monitoring": "weighted", "side_b.g": sb.monitoring.g,
                        "side_b.g_prime": sb.monitoring.g_prime})
        else:
            out["side_b.monitoring"] = "off" if isinstance(sb.monitoring, Off) else "optimal"
    return out


def with_params(s: Scenario, **changes) -> Scenario:
    """Copy of ``s`` with flat-key overrides, e.g. with_params(s, **{"side_b.V_N": 2.0})."""
    params = flatten_scenario(s)
    del params["channel.distance_km"]
    params.update(changes)
    if "channel.distance_km" in changes:
        del params["channel.eta"]
    return scenario_from_params(params)
