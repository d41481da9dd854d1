"""Command-line entry point.

Exit codes: 0 success, 1 invariant violations (strict runs, sweeps with a
violating cell, check-trace on a failing trace), 2 configuration, schema or
script errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path
from typing import Optional

from .adversary import SCRIPTED, STRATEGIES, InvalidAction, ScriptError, StrategySpec, make_strategy
from .params import DegenerateBeta, constants_for_run, constants_report, derive_constants
from .simulator import (
    CONFIG_ENV,
    PASS,
    ConfigError,
    ModelViolation,
    SimConfig,
    TraceError,
    build_report,
    load_config,
    rows_to_csv,
    run,
)
from .simulator.report import pattern_report
from .simulator.replay import replay
from .simulator.sweep import m_spread, run_sweep
from .simulator.trace import Trace

OK, VIOLATION, BAD_INPUT = 0, 1, 2


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help=f"JSON config file (default: ${CONFIG_ENV})")
    p.add_argument("--seed", type=int)
    p.add_argument("--rounds", type=int, help="horizon r_max")
    p.add_argument("--beta", type=float)
    p.add_argument("--m", type=int, help="number of voter chains")
    p.add_argument("--fp", type=float, help="proposer mining rate fp_bar")
    p.add_argument("--fv", type=float, help="per-chain voter mining rate fv_bar")
    p.add_argument("--k-min", type=int, dest="k_min", help="override k_min (0 = use the formula)")
    p.add_argument("--nodes", type=int, help="honest node count")
    p.add_argument("--strategy", choices=sorted(STRATEGIES))
    p.add_argument("--tx-rate", type=float, dest="tx_rate")
    p.add_argument("--tx-until", type=int, dest="tx_until")
    p.add_argument("--trace-level", dest="trace_level")
    p.add_argument("--trace-out", dest="trace_out")
    p.add_argument("--report-out", dest="report_out")
    p.add_argument("--csv-out", dest="csv_out")
    p.add_argument("--strict", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="taiji", description="Seeded PoW consensus simulator with adversary models.")
    sub = ap.add_subparsers(dest="cmd", required=True)
    _common(sub.add_parser("run", help="one seeded run"))
    a = sub.add_parser("attack", help="deterministic attack schedule")
    _common(a)
    a.add_argument("--script", help="JSON file with a custom attack script")
    a.add_argument("--reps", type=int)
    a.add_argument("--gap", type=int)
    s = sub.add_parser("sweep", help="parameter grid")
    _common(s)
    s.add_argument("--seeds", type=int, help="seed count per cell")
    s.add_argument("--workers", type=int)
    c = sub.add_parser("constants", help="derived constants for (beta, m)")
    _common(c)
    t = sub.add_parser("check-trace", help="re-run the analyzers on a stored trace")
    t.add_argument("trace")
    t.add_argument("--report-out", dest="report_out")
    return ap


def _base_config(args, defaults: Optional[dict] = None) -> SimConfig:
    path = args.config or os.environ.get(CONFIG_ENV)
    cfg = load_config(path) if path else SimConfig()
    if defaults and not path:
        cfg = dataclasses.replace(cfg, params=dataclasses.replace(cfg.params, **defaults))
    over = {}
    for flag, field in (("rounds", "r_max"), ("beta", "beta"), ("m", "m"), ("fp", "fp_bar"),
                        ("fv", "fv_bar"), ("nodes", "honest_node_count")):
        v = getattr(args, flag, None)
        if v is not None:
            over[field] = v
    if getattr(args, "k_min", None) is not None:
        over["k_min_override"] = args.k_min or None
    if over:
        cfg = dataclasses.replace(cfg, params=dataclasses.replace(cfg.params, **over))
    top = {}
    for flag in ("seed", "tx_rate", "tx_until", "trace_level"):
        v = getattr(args, flag, None)
        if v is not None:
            top[flag] = v
    if getattr(args, "strategy", None):
        top["strategy"] = StrategySpec(args.strategy)
    return dataclasses.replace(cfg, **top) if top else cfg


def _warn_beta(cfg: SimConfig) -> None:
    if cfg.params.beta >= 0.5:
        print(f"warning: beta={cfg.params.beta} >= 0.5; no block is ever notarized, "
              "so the verdict covers consistency only", file=sys.stderr)


def _emit(args, trace: Optional[Trace], report) -> None:
    if trace is not None and args.trace_out:
        trace.write(args.trace_out)
    if args.report_out:
        Path(args.report_out).write_text(report.to_json() + "\n")
    if getattr(args, "csv_out", None):
        Path(args.csv_out).write_text(rows_to_csv([report.row()]))


def _summary(report) -> str:
    lat = report.latency
    return (f"verdict={report.verdict} mode={report.mode} rounds={report.rounds} "
            f"proposers={report.proposer_blocks} latency_mean={lat.get('mean')} "
            f"censored={lat.get('censored')}/{lat.get('total')} "
            f"conflicts={report.consistency_violations} vote_floor={report.vote_floor_violations} "
            f"invariants={len(report.invariant_violations)} counting_failures={report.counting_failures}")


def _execute(args, cfg: SimConfig, extra=None):
    _warn_beta(cfg)
    try:
        trace, report = run(cfg)
    except (InvalidAction, ScriptError) as e:
        print(f"error: {e}", file=sys.stderr)
        return BAD_INPUT, None
    if extra is not None:
        report.strategy = dict(report.strategy or {}, pattern=extra(trace))
    _emit(args, trace, report)
    print(_summary(report))
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if args.strict and report.verdict != PASS:
        return VIOLATION, report
    return OK, report


def cmd_run(args) -> int:
    return _execute(args, _base_config(args))[0]


ATTACK_DEFAULTS = {"m": 12, "fv_bar": 1.0, "fp_bar": 0.001, "arrival_mode": "bernoulli", "honest_node_count": 2}


def cmd_attack(args) -> int:
    cfg = _base_config(args, ATTACK_DEFAULTS)
    if args.script:
        try:
            script = json.loads(Path(args.script).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"script: {e}") from None
        cfg = dataclasses.replace(cfg, strategy=StrategySpec("custom_script", script=script))
    elif args.strategy is not None and (args.strategy not in SCRIPTED or args.strategy == "custom_script"):
        raise ConfigError(f"strategy: attack needs one of {list(SCRIPTED[:2])} or --script")
    elif cfg.strategy.name not in SCRIPTED or (cfg.strategy.name == "custom_script" and not cfg.strategy.script):
        cfg = dataclasses.replace(cfg, strategy=StrategySpec("hah_displace"))
    opts = dict(cfg.strategy.options)
    for k in ("reps", "gap"):
        if getattr(args, k) is not None:
            opts[k] = getattr(args, k)
    cfg = dataclasses.replace(cfg, strategy=dataclasses.replace(cfg.strategy, options=opts))
    try:
        strat = make_strategy(cfg.strategy, cfg.params, constants_for_run(cfg.params))
    except (ScriptError, ValueError) as e:
        raise ConfigError(f"strategy: {e}") from None
    positions = strat.positions() if hasattr(strat, "positions") else []
    if args.rounds is None and hasattr(strat, "horizon"):
        cfg = dataclasses.replace(cfg, params=dataclasses.replace(cfg.params, r_max=strat.horizon()))
    code, report = _execute(args, cfg, extra=lambda tr: pattern_report(tr, positions))
    if report is not None and positions:
        pat = report.strategy["pattern"]
        print(f"arrivals: {''.join(x['letter'] for x in pat['positions'])}")
        print(f"genesis:  {pat['genesis_string']}")
        print(f"honest notarized: {len(pat['honest_notarized'])}  "
              f"honest on longest notarized chain: {pat['honest_on_notarized_chain']}")
        print(f"partition: {report.partition_histogram}")
    return code


def cmd_sweep(args) -> int:
    cfg = _base_config(args)
    sw = dict(cfg.sweep or {})
    if args.seeds is not None:
        sw["seeds"] = args.seeds
    if args.workers is not None:
        sw["workers"] = args.workers
    cfg = dataclasses.replace(cfg, sweep=sw)
    _warn_beta(cfg)
    res = run_sweep(cfg)
    cells = [c.to_dict() for c in res.cells]
    if args.report_out:
        doc = {"config": cfg.to_dict(), "cells": cells, "m_spread": m_spread(res.cells), "rows": res.rows}
        Path(args.report_out).write_text(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")
    if args.csv_out:
        Path(args.csv_out).write_text(rows_to_csv(res.rows))
    print("m\tbeta\tstrategy\truns\tlatency_mean\tlatency_p95\tcensored\tconflicts\tviolating_runs\terrors")
    for c in res.cells:
        print(f"{c.m}\t{c.beta}\t{c.strategy}\t{c.runs}\t{c.latency_mean}\t{c.latency_p95}\t"
              f"{c.censored}\t{c.consistency_violations}\t{c.violating_runs}\t{c.errors}")
    return VIOLATION if res.violated else OK


def cmd_constants(args) -> int:
    cfg = _base_config(args)
    try:
        c = derive_constants(cfg.params)
    except DegenerateBeta as e:
        print(f"error: {e}", file=sys.stderr)
        return BAD_INPUT
    print(json.dumps({"beta": cfg.params.beta, "m": cfg.params.m, **constants_report(c)}, indent=2))
    return OK


def cmd_check_trace(args) -> int:
    try:
        trace = Trace.read(args.trace)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return BAD_INPUT
    report = build_report(trace)
    checks = {
        "consistency": report.consistency_violations == 0,
        "vote_floor": report.vote_floor_violations == 0,
        "one_per_level": not any(v.get("check") == "one_per_level" for v in report.invariant_violations),
        "late_level": not any(v.get("check") == "late_level" for v in report.invariant_violations),
        "late_depth": not any(v.get("check") == "late_depth" for v in report.invariant_violations),
        "counting": report.counting_failures == 0,
        "pairing": not report.pairing_failures,
    }
    rp = replay(trace)
    for name, ok in checks.items():
        print(f"{name}: {'PASS' if ok else 'FAIL'}")
    if rp.replayed:
        print(f"replay: {'PASS' if rp.ok else 'FAIL'}")
        for mm in rp.mismatches:
            print(f"  mismatch {mm}", file=sys.stderr)
    else:
        print("replay: SKIPPED (summary trace)")
    print(f"verdict: {report.verdict}")
    if args.report_out:
        Path(args.report_out).write_text(report.to_json() + "\n")
    return OK if report.verdict == PASS and rp.ok else VIOLATION


COMMANDS = {
    "run": cmd_run,
    "attack": cmd_attack,
    "sweep": cmd_sweep,
    "constants": cmd_constants,
    "check-trace": cmd_check_trace,
}


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.cmd](args)
    except (ConfigError, TraceError) as e:
        print(f"error: {e}", file=sys.stderr)
        return BAD_INPUT
    except ModelViolation as e:
        print(f"violation: {e}", file=sys.stderr)
        return VIOLATION


if __name__ == "__main__":
    sys.exit(main())
