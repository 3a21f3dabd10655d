import csv
import io
import json

import pytest

from cvqkd_sidechannels import ConfigError, Interferometer, Optimal, SingleCoupler, parse_config
from cvqkd_sidechannels import cli, mc_oracle
from cvqkd_sidechannels.config import flatten_scenario, scenario_from_params, with_params
from cvqkd_sidechannels.gaussian import GaussianError


def write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


# ------------------------------------------------------------------ config

def test_minimal_config_defaults():
    cfg = parse_config("protocol.family = coherent\nchannel.eta = 0.5\n")
    s = cfg.scenario
    assert s.channel.eta == 0.5 and s.channel.eps == 0.0
    assert s.protocol.beta == 0.95 and s.protocol.modulation == "optimized"
    assert not s.side_a.present and not s.side_b.present
    assert cfg.options["run.attack"] == "collective"


def test_comments_and_presence_inference():
    cfg = parse_config("""
        # type-B side channel with optimal monitoring
        protocol.family = squeezed   # trailing comment
        protocol.V_S = 0.1
        side_b.eta_B = 0.7
        side_b.V_N = 1.05
        side_b.monitoring = optimal
    """)
    sb = cfg.scenario.side_b
    assert sb.present and sb.topology == SingleCoupler(0.7) and sb.monitoring == Optimal()


def test_interferometer_requires_phi():
    with pytest.raises(ConfigError) as e:
        parse_config("side_b.topology = interferometer\nside_b.eta_B1 = 0.9\nside_b.eta_B2 = 0.8\n")
    assert any("side_b.phi" in m for m in e.value.errors)
    cfg = parse_config("side_b.topology = interferometer\nside_b.eta_B1 = 0.9\nside_b.eta_B2 = 0.8\nside_b.phi = 0.5\n")
    assert cfg.scenario.side_b.topology == Interferometer(0.9, 0.8, 0.5)


def test_errors_are_collected():
    text = "channel.eta = 0.5\nchannel.eta = 0.6\nbogus.key = 1\nno equals here\nchannel.eps = -1\n"
    with pytest.raises(ConfigError) as e:
        parse_config(text)
    errs = e.value.errors
    assert any("duplicate" in m and "1" in m and "2" in m for m in errs)
    assert any("bogus.key" in m for m in errs)
    assert any("line 4" in m for m in errs)
    assert any("excess noise" in m for m in errs)


def test_distance_conflicts_with_eta():
    with pytest.raises(ConfigError):
        parse_config("channel.eta = 0.5\nchannel.distance_km = 10\n")
    cfg = parse_config("channel.distance_km = 50\n")
    assert cfg.scenario.channel.eta == pytest.approx(0.1)


def test_side_a_optimal_k_default():
    cfg = parse_config("side_a.eta_A = 0.5\nside_a.strategy = correlated_modulation\n")
    assert cfg.scenario.side_a.strategy.k == pytest.approx(1.0)


def test_axes():
    cfg = parse_config("sweep.axis.channel.distance_km = 0 20 3\nsweep.axis.side_b.V_N = 1 100 3 log\nside_b.eta_B = 0.5\n")
    assert [a.values() for a in cfg.axes] == [[0.0, 10.0, 20.0], pytest.approx([1.0, 10.0, 100.0])]
    with pytest.raises(ConfigError):
        parse_config("sweep.axis.channel.eta = 0.5 0.1 3\n")


def test_flatten_round_trip():
    cfg = parse_config("protocol.family = squeezed\nprotocol.V_S = 0.2\nside_a.eta_A = 0.6\nside_a.strategy = thermal\nside_a.V_NS = 2\n")
    params = flatten_scenario(cfg.scenario)
    del params["channel.distance_km"]
    assert scenario_from_params(params) == cfg.scenario
    assert with_params(cfg.scenario, **{"side_a.V_NS": 3.0}).side_a.strategy.V_NS == 3.0


# --------------------------------------------------------------------- cli

def run_cli(args, capsys):
    code = cli.main(args)
    out, err = capsys.readouterr()
    return code, out, err


def test_keyrate_lossless(tmp_path, capsys):
    path = write(tmp_path, "protocol.family = coherent\nprotocol.V_M = 3\nchannel.eta = 1\n")
    code, out, _ = run_cli(["keyrate", "--config", path], capsys)
    assert code == 0
    row = next(csv.DictReader(io.StringIO(out)))
    assert float(row["key_rate"]) == pytest.approx(0.95 * float(row["I_AB"]))
    assert float(row["I_AB"]) == pytest.approx(1.0)
    assert row["attack"] == "collective"


def test_keyrate_json_and_output_file(tmp_path, capsys):
    path = write(tmp_path, "channel.eta = 0.5\nrun.format = json\n")
    out_path = tmp_path / "out.json"
    code, out, _ = run_cli(["keyrate", "--config", path, "--output", str(out_path), "--attack", "individual"], capsys)
    assert code == 0 and out == ""
    rows = json.loads(out_path.read_text())
    assert rows[0]["attack"] == "individual" and rows[0]["key_rate"] > 0


SWEEP_CFG = """
protocol.family = coherent
protocol.beta = 0.95
channel.eps = 0.05
side_b.eta_B = {eta_B}
side_b.V_N = 1.05
side_b.monitoring = {mon}
sweep.axis.channel.distance_km = 10 80 3
sweep.optimize_modulation = true
"""


def test_sweep_csv_columns_and_determinism(tmp_path, capsys):
    path = write(tmp_path, SWEEP_CFG.format(eta_B=0.7, mon="off"))
    code, first, _ = run_cli(["sweep", "--config", path], capsys)
    assert code == 0
    code, second, _ = run_cli(["sweep", "--config", path, "--threads", "2"], capsys)
    assert first == second
    rows = list(csv.DictReader(io.StringIO(first)))
    assert len(rows) == 3
    header = first.splitlines()[0].split(",")
    assert header[-5:] == ["I_AB", "eve_bound", "key_rate", "attack", "flags"]
    assert header[:-5] == sorted(header[:-5])
    assert [float(r["channel.distance_km"]) for r in rows] == [10.0, 45.0, 80.0]


def test_sweep_monitored_matches_clean(tmp_path, capsys):
    _, mon, _ = run_cli(["sweep", "--config", write(tmp_path, SWEEP_CFG.format(eta_B=0.5, mon="optimal"))], capsys)
    clean = SWEEP_CFG.format(eta_B=0.5, mon="off").replace("side_b.eta_B = 0.5\nside_b.V_N = 1.05\nside_b.monitoring = off\n", "")
    _, ref, _ = run_cli(["sweep", "--config", write(tmp_path, clean, "clean.cfg")], capsys)
    k_mon = [float(r["key_rate"]) for r in csv.DictReader(io.StringIO(mon))]
    k_ref = [float(r["key_rate"]) for r in csv.DictReader(io.StringIO(ref))]
    assert k_mon == pytest.approx(k_ref, rel=1e-8)


def test_threshold_and_optimize(tmp_path, capsys):
    path = write(tmp_path, "channel.eta = 0.5\nside_b.eta_B = 0.5\nside_b.V_N = 1.05\nthreshold.parameter = distance\nprotocol.modulation = standard\nprotocol.V_M = 20\n")
    code, out, _ = run_cli(["threshold", "--config", path], capsys)
    assert code == 0
    row = next(csv.DictReader(io.StringIO(out)))
    assert row["threshold.parameter"] == "distance_km" and float(row["threshold.critical"]) > 0
    path = write(tmp_path, "channel.eta = 0.1\nchannel.eps = 0.05\n", "opt.cfg")
    code, out, _ = run_cli(["optimize", "--config", path], capsys)
    assert code == 0 and float(next(csv.DictReader(io.StringIO(out)))["key_rate"]) > 0


def test_exit_code_config(tmp_path, capsys):
    code, _, err = run_cli(["keyrate", "--config", write(tmp_path, "channel.eta = 2\nfoo = 1\n")], capsys)
    assert code == 1 and "foo" in err and "transmittance" in err
    code, _, _ = run_cli(["keyrate"], capsys)
    assert code == 1
    code, _, _ = run_cli(["keyrate", "--config", str(tmp_path / "missing.cfg")], capsys)
    assert code == 1


def test_exit_code_numeric(tmp_path, capsys, monkeypatch):
    def boom(*a, **k):
        raise GaussianError("unphysical symplectic eigenvalue")
    monkeypatch.setattr(cli.analysis, "key_rate", boom)
    code, _, err = run_cli(["keyrate", "--config", write(tmp_path, "channel.eta = 0.5\n")], capsys)
    assert code == 2 and "numerical" in err


def test_verify(tmp_path, capsys, monkeypatch):
    code, out, _ = run_cli(["verify", "--seed", "1", "--samples", "20000"], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["pass"] and len(rep["scenarios"]) == 10
    path = write(tmp_path, "channel.eta = 0.4\nside_a.eta_A = 0.7\n")
    code, out, _ = run_cli(["verify", "--config", path, "--samples", "20000"], capsys)
    assert code == 0 and "config" in json.loads(out)["scenarios"]
    monkeypatch.setattr(mc_oracle, "Z_LIMIT", 1e-9)
    code, _, _ = run_cli(["verify", "--samples", "20000"], capsys)
    assert code == 3
