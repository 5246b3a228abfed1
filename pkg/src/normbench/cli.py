"""Command line entry point: ``normbench {run,synth,gradcheck,normcheck}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import normalizers as nz
from .bench import DatasetSource, ExperimentConfig, ExperimentReport, emit_report, run_experiment
from .checks import run_gradcheck, run_normcheck
from .drnn import NetSpec, TrainConfig
from .errors import NormbenchError
from .series_data import synth_ohlc, to_csv


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="normbench", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the normalization sweep")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", action="append", metavar="CSV", help="OHLC CSV file (repeatable)")
    src.add_argument("--synthetic", action="store_true", help="use generated random-walk data")
    src.add_argument("--replay", metavar="REPORT", help="re-run the config stored in a report.json")
    run.add_argument("--seed", type=int, default=7, help="first synthetic dataset seed")
    run.add_argument("--n", type=int, nargs="+", default=[493], help="synthetic dataset length(s)")
    run.add_argument("--methods", nargs="+", default=[m.value for m in nz.ALL_METHODS])
    run.add_argument("--hidden", type=int, nargs="+", default=[20], help="hidden units per layer")
    run.add_argument("--output-mode", choices=["linear", "softmax"], default="linear")
    run.add_argument("--lr", type=float, default=TrainConfig.learning_rate)
    run.add_argument("--epochs", type=int, default=TrainConfig.epochs)
    run.add_argument("--patience", type=int, default=TrainConfig.early_stop_patience,
                     help="early-stop patience in epochs (0 disables)")
    run.add_argument("--no-shuffle", action="store_true")
    run.add_argument("--window", type=int, default=10)
    run.add_argument("--horizon", type=int, default=0)
    run.add_argument("--train-frac", type=float, default=0.70)
    run.add_argument("--val-frac", type=float, default=0.15)
    run.add_argument("--minmax-range", type=float, nargs=2, default=[0.0, 1.0], metavar=("LOW", "HIGH"))
    run.add_argument("--seeds", type=int, nargs="+", default=[0], help="training seeds")
    run.add_argument("--out", default="results", help="output directory")
    run.add_argument("--jobs", type=int, default=1)

    synth = sub.add_parser("synth", help="write a synthetic OHLC CSV")
    synth.add_argument("--seed", type=int, default=7)
    synth.add_argument("--n", type=int, default=493)
    synth.add_argument("--start-price", type=float, default=10000.0)
    synth.add_argument("--out", help="output file (default: stdout)")

    gc = sub.add_parser("gradcheck", help="compare BPTT with finite differences")
    gc.add_argument("--trials", type=int, default=20)
    gc.add_argument("--epsilon", type=float, default=1e-5)
    gc.add_argument("--tol", type=float, default=1e-4)
    gc.add_argument("--seed", type=int, default=0)

    nc = sub.add_parser("normcheck", help="scaler oracle and round-trip checks")
    nc.add_argument("--samples", type=int, default=1000)
    nc.add_argument("--seed", type=int, default=0)
    return p


def _config_from_args(args) -> ExperimentConfig:
    if args.replay:
        return ExperimentReport.load(args.replay).config
    if args.synthetic:
        datasets = tuple(DatasetSource(f"synth-{args.seed + i}-n{n}", synth_seed=args.seed + i, synth_n=n)
                         for i, n in enumerate(args.n))
    else:
        for path in args.data:
            if not Path(path).is_file():
                raise FileNotFoundError(f"data file not found: {path}")
        datasets = tuple(DatasetSource(Path(p).stem, path=str(p)) for p in args.data)
    return ExperimentConfig(
        datasets=datasets,
        methods=tuple(nz.Method.parse(m) for m in args.methods),
        net=NetSpec(hidden_dims=tuple(args.hidden), output_mode=args.output_mode),
        train=TrainConfig(learning_rate=args.lr, epochs=args.epochs,
                          shuffle=not args.no_shuffle,
                          early_stop_patience=args.patience or None),
        window_len=args.window,
        horizon=args.horizon,
        train_frac=args.train_frac,
        val_frac=args.val_frac,
        seeds=tuple(args.seeds),
        minmax_range=tuple(args.minmax_range),
        output_dir=args.out,
    )


def _cmd_run(args) -> int:
    cfg = _config_from_args(args)
    out = args.out if not args.replay or args.out != "results" else cfg.output_dir
    report = run_experiment(cfg, jobs=args.jobs)
    emit_report(report, out)
    failed = [c for c in report.cells if not c.ok]
    print(f"{len(report.cells)} cell(s), {len(failed)} failed; report written to {out}")
    for c in failed:
        print(f"  {c.key}: {c.error}")
    return 0


def _cmd_synth(args) -> int:
    text = to_csv(synth_ohlc(args.seed, args.n, start_price=args.start_price))
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _report_checks(results) -> int:
    for r in results:
        print(r.line())
    bad = sum(not r.passed for r in results)
    print(f"{len(results) - bad}/{len(results)} checks passed")
    return 1 if bad else 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "synth":
            return _cmd_synth(args)
        if args.command == "gradcheck":
            return _report_checks(run_gradcheck(args.trials, args.epsilon, args.tol, seed=args.seed))
        return _report_checks(run_normcheck(args.samples, args.seed))
    except (NormbenchError, OSError) as exc:
        print(f"normbench: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
