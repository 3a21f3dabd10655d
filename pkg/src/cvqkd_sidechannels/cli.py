"""Command-line front end: keyrate, threshold, optimize, sweep, verify.

Exit codes: 1 for invalid configuration, 2 for numerical failure, 3 when
the Monte Carlo verification finds a discrepancy.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import analysis, mc_oracle
from .config import ConfigError, flatten_scenario, parse_config
from .gaussian import GaussianError
from .scenario import ScenarioError, SideChannelB, Weighted

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VERIFY = 0, 1, 2, 3
RESULT_COLUMNS = ("I_AB", "eve_bound", "key_rate", "attack", "flags")


def fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12g")
    if v is None:
        return ""
    return str(v)


def _json_value(v):
    if isinstance(v, bool) or v is None or isinstance(v, str):
        return v
    if isinstance(v, (float, np.floating)):
        return float(format(float(v), ".12g"))
    return v


def report_row(params: dict, report=None, flags=(), error=None, extra=None) -> dict:
    row = {k: params[k] for k in sorted(params)}
    if extra:
        row.update(extra)
    flags = list(flags)
    if error:
        flags.append(f"error={error}")
    row.update(
        I_AB=report.I_AB if report else None,
        eve_bound=report.eve_bound if report else None,
        key_rate=report.key_rate if report else None,
        attack=report.attack if report else None,
        flags=";".join(flags),
    )
    return row


def render(rows: list[dict], form: str) -> str:
    if form == "json":
        return json.dumps([{k: _json_value(v) for k, v in r.items()} for r in rows], indent=2) + "\n"
    buf = io.StringIO()
    columns = []
    for r in rows:
        columns += [k for k in r if k not in columns]
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([fmt(r.get(c)) for c in columns])
    return buf.getvalue()


# --------------------------------------------------------------- commands

def cmd_keyrate(cfg, attack):
    rep = analysis.key_rate(cfg.scenario, attack)
    return [report_row(cfg.params, rep, rep.flags)]


def cmd_threshold(cfg, attack):
    which = cfg.options["threshold.parameter"]
    fn = {"eps": analysis.find_eps_max, "V_N": analysis.find_vn_max, "distance": analysis.find_max_distance}[which]
    res = fn(cfg.scenario, attack)
    extra = {
        "threshold.parameter": res.parameter,
        "threshold.critical": res.critical,
        "threshold.bracket_lo": res.bracket[0],
        "threshold.bracket_hi": res.bracket[1],
        "threshold.iterations": res.iterations,
    }
    row = {k: cfg.params[k] for k in sorted(cfg.params)}
    row.update(extra)
    row.update(attack=res.attack, flags=";".join(res.flags))
    return [row]


def cmd_optimize(cfg, attack):
    s = cfg.scenario
    if cfg.options["optimize.target"] == "modulation":
        opt = analysis.optimize_modulation(s, attack=attack)
        s = s.replace(**{"protocol.V_M": opt.x})
    else:
        opt = analysis.optimize_monitor_weight(s, attack=attack)
        sb = s.side_b
        s = s.replace(side_b=SideChannelB(sb.present, sb.topology, sb.V_N, Weighted(1.0, opt.x)))
    rep = analysis.key_rate(s, attack)
    return [report_row(flatten_scenario(s), rep, tuple(rep.flags) + opt.flags)]


def cmd_sweep(cfg, attack, threads):
    grid = analysis.SweepGrid(cfg.scenario, cfg.axes)
    recs = analysis.run_sweep(grid, attack, threads=threads, optimize_modulation=cfg.options["sweep.optimize_modulation"])
    return [report_row(r.params, r.report, r.flags, r.error) for r in recs]


def cmd_verify(cfg, seed, samples, threads):
    scenarios = mc_oracle.canned_scenarios()
    if cfg is not None:
        scenarios["config"] = cfg.scenario
    return mc_oracle.validation_report(scenarios, mc_oracle.SeededRun(seed, samples, threads))


# ------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cvqkd-sc", description="CV-QKD key rates with semitrusted side channels")
    p.add_argument("command", choices=["keyrate", "threshold", "optimize", "sweep", "verify"])
    p.add_argument("--config", help="flat key = value configuration file")
    p.add_argument("--output", help="output path (default stdout)")
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--attack", choices=["individual", "collective"])
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--threads", type=int)
    return p


def _emit(text: str, path: str | None):
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = None
    try:
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                cfg = parse_config(fh.read())
        elif args.command != "verify":
            raise ConfigError(["--config is required for this command"])
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as e:
        for msg in e.errors:
            print(f"error: {msg}", file=sys.stderr)
        return EXIT_CONFIG

    opts = cfg.options if cfg else {}
    attack = args.attack or opts.get("run.attack", "collective")
    form = args.format or opts.get("run.format", "csv")
    seed = args.seed if args.seed is not None else opts.get("run.seed", 1)
    samples = args.samples if args.samples is not None else opts.get("run.samples", 1_000_000)
    threads = args.threads if args.threads is not None else opts.get("run.threads", 1)

    try:
        if args.command == "verify":
            report = cmd_verify(cfg, seed, samples, threads)
            _emit(mc_oracle.report_json(report) + "\n", args.output)
            return EXIT_OK if report["pass"] else EXIT_VERIFY
        if args.command == "keyrate":
            rows = cmd_keyrate(cfg, attack)
        elif args.command == "threshold":
            rows = cmd_threshold(cfg, attack)
        elif args.command == "optimize":
            rows = cmd_optimize(cfg, attack)
        else:
            rows = cmd_sweep(cfg, attack, threads)
    except GaussianError as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ScenarioError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, np.linalg.LinAlgError) as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    _emit(render(rows, form), args.output)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
