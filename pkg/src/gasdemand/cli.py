"""Command-line entry point: ``gasdemand {synth,backtest,forecast,features}``.

Exit codes: 0 success, 1 pipeline/runtime error, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import logging
import os
import sys

import numpy as np

from . import REPORT_FORMAT_VERSION, __version__
from .backtest import NATIONAL, SERIES_ORDER, BacktestConfig, ConfigError, PipelineError, run_backtest
from .dataset import DateInterval, SeriesKind, dump_series, load_series
from .features import MissingHistoryError, build_matrix, build_row, usable_range
from .models import load_model
from .synthgen import SynthSpec, SynthSpecError, generate

EXIT_OK, EXIT_PIPELINE, EXIT_USAGE = 0, 1, 2
DEFAULT_SYNTH_RANGE = (dt.date(2007, 1, 1), dt.date(2018, 12, 31))


class UsageError(Exception):
    pass


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON: {exc}") from None


def _parse_date(text, what):
    try:
        return dt.date.fromisoformat(text)
    except (TypeError, ValueError):
        raise UsageError(f"{what} must be an ISO date (YYYY-MM-DD), got {text!r}") from None


def _load_config(path, seed=None) -> BacktestConfig:
    blob = _read_json(path)
    if seed is not None and isinstance(blob, dict):
        blob["seed"] = seed
    try:
        config = BacktestConfig.from_dict(blob, base_dir=os.path.dirname(os.path.abspath(path)))
    except (ConfigError, TypeError) as exc:
        raise UsageError(f"{path}: {exc}") from None
    missing = [f"{k.value}: {p}" for k, p in config.series_paths.items() if not os.path.isfile(p)]
    if missing:
        raise UsageError(f"series file(s) not found: {', '.join(missing)}")
    return config


def _output_dir(args, config):
    return args.out or config.output_dir or "out"


def cmd_synth(args) -> int:
    blob = _read_json(args.config)
    if not isinstance(blob, dict):
        raise UsageError("spec must be a JSON object")
    blob = dict(blob)
    start = _parse_date(blob.pop("start", DEFAULT_SYNTH_RANGE[0].isoformat()), "start")
    end = _parse_date(blob.pop("end", DEFAULT_SYNTH_RANGE[1].isoformat()), "end")
    if args.seed is not None:
        blob["seed"] = args.seed
    try:
        spec = SynthSpec.from_dict(blob)
    except (SynthSpecError, TypeError) as exc:
        raise UsageError(f"{args.config}: {exc}") from None
    if end < start.replace(year=start.year + 3) - dt.timedelta(days=1):
        raise UsageError(f"range {start}..{end} is shorter than 3 years")
    series = generate(spec, DateInterval(start, end))
    os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
    dump_series(series, args.out)
    return EXIT_OK


def cmd_backtest(args) -> int:
    config = _load_config(args.config, args.seed)
    out = _output_dir(args, config)
    try:
        series = config.load_series()
    except ValueError as exc:
        raise PipelineError(str(exc)) from exc
    report = run_backtest(config, series=series, jobs=args.jobs, output_dir=out)
    for name in report.series_names():
        print(report.table(name))
        print()
    print(f"report written to {os.path.join(out, 'report.csv')}")
    return EXIT_OK


def cmd_forecast(args) -> int:
    config = _load_config(args.config)
    day = _parse_date(args.date, "--date")
    model_dir = os.path.join(_output_dir(args, config), "models")
    manifest_path = os.path.join(model_dir, "manifest.json")
    if not os.path.isfile(manifest_path):
        raise PipelineError(f"no fitted models in {model_dir}; run `gasdemand backtest` first")
    manifest = _read_json(manifest_path)
    name = args.model or config.forecast_model
    base = manifest["base_models"]
    if name not in base and name not in manifest["ensembles"]:
        raise UsageError(f"model {name!r} was not fitted; available: {base + manifest['ensembles']}")

    values = {}
    for kind in SERIES_ORDER:
        if kind.value not in manifest["series"]:
            continue
        series = load_series(config.series_paths[kind], kind)
        try:
            row = build_row(series, day).values
        except MissingHistoryError as exc:
            raise PipelineError(f"{kind.value} {day}: insufficient history: {exc}") from exc
        mdir = os.path.join(model_dir, kind.value)
        if name in base:
            value = load_model(os.path.join(mdir, f"{name}.json")).predict(row)[0]
        else:
            panel = np.array([[load_model(os.path.join(mdir, f"{b}.json")).predict(row)[0] for b in base]])
            value = load_model(os.path.join(mdir, f"{name}.json")).predict(panel)[0]
        values[kind.value] = float(value)
    if len(values) == len(SERIES_ORDER):
        values[NATIONAL] = sum(values[k.value] for k in SERIES_ORDER)
    for key, value in values.items():
        print(f"{key} {value!r}")
    return EXIT_OK


def cmd_features(args) -> int:
    try:
        kind = SeriesKind(args.kind)
    except ValueError:
        raise UsageError(f"--kind must be one of RGD, IGD, TGD, got {args.kind!r}") from None
    if not os.path.isfile(args.series):
        raise UsageError(f"series file not found: {args.series}")
    series = load_series(args.series, kind)
    end = _parse_date(args.end, "--end") if args.end else series.end
    try:
        if args.start:
            interval = DateInterval(_parse_date(args.start, "--start"), end)
        else:
            interval = usable_range(series, DateInterval(series.start, end))
        fm = build_matrix(series, interval)
    except MissingHistoryError as exc:
        raise PipelineError(str(exc)) from exc
    fm.to_csv(args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gasdemand", description="Day-ahead gas demand forecasting toolkit.")
    parser.add_argument("--version", action="version",
                        version=f"gasdemand {__version__} (report format {REPORT_FORMAT_VERSION})")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to standard error")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic series CSV from a spec JSON")
    p.add_argument("--config", required=True, help="SynthSpec JSON (may also set start/end dates)")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--seed", type=int, help="override the spec seed")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("backtest", help="run the yearly backtest and write the MAE report")
    p.add_argument("--config", required=True, help="run config JSON")
    p.add_argument("--out", help="output directory (default: config output_dir, else ./out)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers (output does not depend on it)")
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("forecast", help="day-ahead forecast from models saved by backtest")
    p.add_argument("--config", required=True, help="run config JSON used for the backtest")
    p.add_argument("--date", required=True, help="day to forecast (YYYY-MM-DD)")
    p.add_argument("--out", help="backtest output directory holding models/")
    p.add_argument("--model", help="model or ensemble to use (default: config forecast_model)")
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("features", help="write the feature matrix of a series as CSV")
    p.add_argument("--series", required=True, help="series CSV")
    p.add_argument("--kind", required=True, help="RGD, IGD or TGD")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--start", help="first date (default: first date with full lag history)")
    p.add_argument("--end", help="last date (default: series end)")
    p.set_defaults(func=cmd_features)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "jobs", 1) is not None and getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be >= 1")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"gasdemand: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PipelineError, ValueError, OSError, ArithmeticError, RuntimeError) as exc:
        print(f"gasdemand: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
