"""Command-line scenario runner.

Verbs:
    run     --config cfg.json [--mode M] [--seed N] [--out DIR] [--no-figures]
    record  --config cfg.json --trace t.log [...run options]
    replay  --trace t.log [--mode M] [--out DIR] [--no-figures]
    check   --trace t.log [--mode M] [--perturb-tie-break]
    report  --trace t.log [--out DIR] [--no-figures]

Exit codes: 0 success, 1 equivalence mismatch (check), 2 config or input
error, 3 simulation error (the offending command seq is printed). The
output directory resolves as --out, then $STREAMFTL_OUT_DIR, then cwd.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .errors import ConfigInvalid, SimulationError, TraceParseError
from .scenario import (ScenarioRunError, check_trace, config_from_file,
                       emit_outputs, replay_trace, resolve_out_dir,
                       run_scenario)

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_CONFIG = 2
EXIT_SIM = 3


def _add_out_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--no-figures", action="store_true",
                   help="skip rendering the report figures")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="streamftl", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="run a scenario config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--mode", choices=["vanilla", "flashalloc"], default=None)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--trace", default=None, help="also record the command trace")
    _add_out_args(p_run)

    p_rec = sub.add_parser("record", help="run a scenario and record its trace")
    p_rec.add_argument("--config", required=True)
    p_rec.add_argument("--mode", choices=["vanilla", "flashalloc"], default=None)
    p_rec.add_argument("--seed", type=int, default=None)
    p_rec.add_argument("--trace", required=True)
    _add_out_args(p_rec)

    p_rep = sub.add_parser("replay", help="re-execute a recorded trace")
    p_rep.add_argument("--trace", required=True)
    p_rep.add_argument("--mode", choices=["vanilla", "flashalloc"], default=None)
    _add_out_args(p_rep)

    p_chk = sub.add_parser("check", help="replay a trace through the engine and "
                                         "the brute-force oracle, compare digests")
    p_chk.add_argument("--trace", required=True)
    p_chk.add_argument("--mode", choices=["vanilla", "flashalloc"], default=None)
    p_chk.add_argument("--perturb-tie-break", action="store_true",
                       help="negative control: the oracle breaks GC ties the "
                            "other way; the check is expected to fail")

    p_rpt = sub.add_parser("report", help="recompute stats (CSV + figures) from a trace")
    p_rpt.add_argument("--trace", required=True)
    _add_out_args(p_rpt)
    return parser


def _load_config(args):
    cfg = config_from_file(args.config)
    if getattr(args, "mode", None):
        cfg = dataclasses.replace(cfg, mode=args.mode)
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(
            cfg, seed=args.seed,
            interleave=dataclasses.replace(cfg.interleave, seed=args.seed))
    return cfg


def _finish(report, samples, device, args, stem):
    report = emit_outputs(report, samples, device, args.out, stem,
                          figures=not args.no_figures)
    print(f"{report.name}: mode={report.mode} seed={report.seed} "
          f"end_waf={report.end_cumulative_waf:.3f} "
          f"copybacks={report.total_copybacks} erases={report.total_erases}")
    print(f"csv: {report.csv_path}")
    for path in report.figure_paths:
        print(f"figure: {path}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.verb in ("run", "record"):
            cfg = _load_config(args)
            trace = getattr(args, "trace", None)
            report, samples, device = run_scenario(cfg, trace_path=trace)
            stem = f"{cfg.name}_{cfg.mode}_seed{cfg.seed}"
            return _finish(report, samples, device, args, stem)
        if args.verb == "replay":
            report, samples, device = replay_trace(args.trace, mode=args.mode)
            return _finish(report, samples, device, args, "replay")
        if args.verb == "report":
            report, samples, device = replay_trace(args.trace, name="report")
            return _finish(report, samples, device, args, "report")
        if args.verb == "check":
            equal, engine_digest, oracle_digest, divergence = check_trace(
                args.trace, mode=args.mode,
                perturb_tie_break=args.perturb_tie_break)
            print(f"engine digest: {engine_digest}")
            print(f"oracle digest: {oracle_digest}")
            if divergence is not None:
                print(f"first outcome divergence at seq {divergence[0]}: "
                      f"engine={divergence[1]} oracle={divergence[2]}")
            print("EQUAL" if equal else "MISMATCH")
            return EXIT_OK if equal else EXIT_MISMATCH
    except ScenarioRunError as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_SIM
    except (ConfigInvalid, TraceParseError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationError as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_SIM
    raise AssertionError("unreachable verb")


if __name__ == "__main__":
    sys.exit(main())
