"""Command-line entry point: ``gapde <command> [--preset NAME | --config FILE] ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import GapdeError
from .experiment import (
    ExperimentConfig, Report, RunArtifacts, comparison_table, preset, preset_names,
    run_experiment, run_sweep, solve_cached,
)
from .surrogate import SurrogateNet

log = logging.getLogger("gapde")


def _load_config(args) -> ExperimentConfig:
    if args.config and args.preset:
        raise GapdeError("use either --config or --preset, not both")
    if args.config:
        cfg = ExperimentConfig.load(args.config)
    elif args.preset:
        cfg = preset(args.preset)
    else:
        raise GapdeError("one of --config or --preset is required")
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out:
        cfg.out_dir = args.out
    if getattr(args, "cache", None):
        cfg.cache_dir = args.cache
    if getattr(args, "noise", None) is not None:
        cfg.noise = args.noise
    if getattr(args, "samples", None) is not None:
        cfg.n_samples = args.samples
    return cfg


def _common(parser):
    parser.add_argument("--config", help="experiment JSON file")
    parser.add_argument("--preset", help="named preset, e.g. kdv-desk")
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--cache", help="directory for cached reference solutions")


def cmd_solve(args):
    cfg = _load_config(args)
    field = solve_cached(cfg.problem, cfg.cache_dir)
    out = Path(cfg.out_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    field.save(out / "field.bin")
    if args.csv:
        field.to_csv(out / "field.csv")
    print(f"{field.kind}: {field.values.shape[0]} x {field.values.shape[1]} = {field.size} points "
          f"-> {out / 'field.bin'}")


def _pipeline(args, run_ga, with_baseline):
    cfg = _load_config(args)
    cfg.run_ga = run_ga
    if not with_baseline:
        cfg.baseline = None
    elif cfg.baseline is None:
        raise GapdeError("this configuration has no baseline section")
    art = RunArtifacts()
    if getattr(args, "net", None):
        art.net = SurrogateNet.load(args.net)
    report = run_experiment(cfg, art)
    sys.stdout.write(report.to_text())
    return report


def cmd_train(args):
    cfg = _load_config(args)
    cfg.run_ga = False
    cfg.baseline = None
    art = RunArtifacts()
    run_experiment(cfg, art)
    res = art.train_result
    print(f"trained {art.net.layer_sizes} ({art.net.activation}); best epoch {res.best_epoch}, "
          f"validation mse {res.best_val_loss:.3e}")
    if cfg.out_dir:
        print(f"net saved to {Path(cfg.out_dir) / 'net.json'}")


def cmd_discover(args):
    _pipeline(args, run_ga=True, with_baseline=args.baseline)


def cmd_baseline(args):
    _pipeline(args, run_ga=False, with_baseline=True)


def cmd_sweep(args):
    cfg = _load_config(args)
    values = [float(v) for v in args.values.split(",")]
    reports = run_sweep(cfg, args.axis, values)
    sys.stdout.write(comparison_table(reports, args.axis))


def cmd_report(args):
    reports = []
    for path in args.paths:
        p = Path(path)
        if p.is_dir():
            p = p / "report.json"
        data = json.loads(p.read_text())
        reports.append(Report(**data))
    if args.table:
        sys.stdout.write(comparison_table(reports, args.axis))
    else:
        for r in reports:
            sys.stdout.write(r.to_text())


def build_parser():
    parser = argparse.ArgumentParser(prog="gapde", description="PDE structure discovery toolkit")
    parser.add_argument("-v", "--verbose", action="store_true", help="log stage progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="generate a reference dataset")
    _common(p)
    p.add_argument("--csv", action="store_true", help="also write x,t,u rows as CSV")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("train", help="train the surrogate net")
    _common(p)
    p.add_argument("--noise", type=float, help="multiplicative noise level")
    p.add_argument("--samples", type=int, help="number of training samples")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("discover", help="full pipeline with the genetic search")
    _common(p)
    p.add_argument("--noise", type=float)
    p.add_argument("--samples", type=int)
    p.add_argument("--net", help="reuse a trained net instead of training")
    p.add_argument("--baseline", action="store_true", help="also run the STRidge baseline")
    p.set_defaults(func=cmd_discover)

    p = sub.add_parser("baseline", help="STRidge over a fixed library")
    _common(p)
    p.add_argument("--noise", type=float)
    p.add_argument("--samples", type=int)
    p.add_argument("--net", help="reuse a trained net instead of training")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("sweep", help="repeat the pipeline over noise levels or sample counts")
    _common(p)
    p.add_argument("--axis", choices=("noise", "data_volume"), required=True)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="print saved reports")
    p.add_argument("paths", nargs="+", help="report.json files or run directories")
    p.add_argument("--table", action="store_true", help="one comparison row per report")
    p.add_argument("--axis", choices=("noise", "data_volume"), default="noise")
    p.set_defaults(func=cmd_report)

    sub.add_parser("presets", help="list preset names").set_defaults(
        func=lambda args: print("\n".join(preset_names())))
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (GapdeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
