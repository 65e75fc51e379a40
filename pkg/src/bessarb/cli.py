"""Command-line entry point.

Every subcommand reads its inputs from flags, optionally seeded from a
``key = value`` config file (``--config``); explicit flags win. Artifacts
go to ``--out`` and are byte-identical across identical runs.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import zlib
from pathlib import Path

import numpy as np

from . import accuracy, finance, forecast_ml, sweeps
from .baseline import BaselineParams, run_baseline_backtest
from .battery import BatteryConfig
from .market_data import (
    REGIONS,
    ForecastParseReport,
    MarketDataError,
    align,
    cache_read,
    cache_write,
    parse_dispatch,
    parse_predispatch,
    resample_to_30min,
)
from .optimizer import OptimizerParams, run_milp_backtest
from .synthetic import hourly_bias, synthetic_dataset
from .trees import ForestParams

logger = logging.getLogger("bessarb")

STRATEGIES = ("baseline", "milp-raw", "milp-ml")


class CliError(Exception):
    """A user-facing failure; reported without a traceback."""


# ------------------------------------------------------------- helpers


def read_config(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _dump_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(args):
    if not args.cache:
        raise CliError("--cache is required")
    dataset = cache_read(args.cache)
    if dataset.region != args.region:
        raise CliError(f"cache holds region {dataset.region}, not {args.region}")
    if getattr(args, "start", None) or getattr(args, "end", None):
        dataset = dataset.slice(args.start, args.end)
        if len(dataset.settlements) == 0:
            raise CliError("no settlements in the requested date range")
    return dataset


def _battery(args) -> BatteryConfig:
    return BatteryConfig(capacity_init=args.capacity, power_max=args.power, degradation_rate=args.degradation)


def _pair(text):
    try:
        buy, sell = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected BUY:SELL, got {text!r}") from None
    return buy, sell


def _range(text):
    try:
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI:STEP, got {text!r}") from None
    if step <= 0:
        raise argparse.ArgumentTypeError("step must be positive")
    return tuple(float(v) for v in np.round(np.arange(lo, hi + step / 2, step), 10))


# ------------------------------------------------------------ commands


def cmd_ingest(args) -> int:
    out = _out_dir(args)
    cache = Path(args.cache) if args.cache else out / "dataset.cache"
    report = ForecastParseReport()
    if args.synthetic_days:
        bias = hourly_bias() if args.synthetic_bias else None
        dataset = synthetic_dataset(args.synthetic_start, args.synthetic_days, args.seed, args.region, bias=bias)
        report.kept = len(dataset.forecasts)
    else:
        if not (args.dispatch and args.forecasts):
            raise CliError("give --dispatch and --forecasts, or --synthetic-days")
        for path in (args.dispatch, args.forecasts):
            if not Path(path).exists():
                raise CliError(f"input file not found: {path}")
        settlements = resample_to_30min(parse_dispatch(args.dispatch, args.region))
        forecasts = parse_predispatch(args.forecasts, args.region, report)
        dataset = align(settlements, forecasts, args.region)
    cache_write(dataset, cache)
    times = dataset.settlements.times.astype(np.int64)
    gaps = int(np.sum(np.diff(times) != 30)) if len(times) > 1 else 0
    summary = {
        "region": dataset.region,
        "settlements": len(dataset.settlements),
        "forecasts": len(dataset.forecasts),
        "forecasts_too_close": report.too_close,
        "forecasts_rejected": report.rejected,
        "forecasts_unmatched": dataset.unmatched_count,
        "settlement_gaps": gaps,
        "cache": str(cache),
        "cache_crc32": f"{zlib.crc32(cache.read_bytes()):08x}",
    }
    _dump_json(out / "ingest_report.json", summary)
    for key in ("settlements", "forecasts", "forecasts_too_close", "forecasts_rejected", "forecasts_unmatched", "settlement_gaps"):
        print(f"{key}: {summary[key]}")
    print(f"cache written: {cache} (crc32 {summary['cache_crc32']})")
    return 0


def cmd_accuracy(args) -> int:
    dataset = _load(args)
    out = _out_dir(args)
    if args.model:
        model = forecast_ml.load_model(args.model)
        forecast_ml.accuracy_report(model, dataset, out, args.metric)
    else:
        accuracy.export_all(dataset, out, metric=args.metric)
    vol = accuracy.volatility(dataset.settlements)
    print(f"matched forecasts: {int(dataset.matched.sum())}")
    print(f"mean daily volatility: {vol.mean:.2f} (complete days {len(vol.records)}, skipped {vol.skipped_days})")
    print(f"exports written to {out}")
    return 0


def _ml_source(args, dataset):
    if not args.model:
        raise CliError("strategy milp-ml needs --model (see train-forecast)")
    if not Path(args.model).exists():
        raise CliError(f"model file not found: {args.model}")
    model = forecast_ml.load_model(args.model)
    span = (dataset.settlements.times.min(), dataset.settlements.times.max() + np.timedelta64(30, "m"))
    forecast_ml.check_disjoint(forecast_ml.train_range(model), span)
    return forecast_ml.enhanced_source(model, dataset)


def cmd_backtest(args) -> int:
    dataset = _load(args)
    config = _battery(args)
    if args.strategy == "baseline":
        params = BaselineParams(args.charge_price, args.discharge_price, 3 if args.daily_actions is None else args.daily_actions)
        result = run_baseline_backtest(dataset, config, params)
    else:
        params = OptimizerParams(
            args.charge_price, args.discharge_price, args.lookahead_hours, 6 if args.daily_actions is None else args.daily_actions, args.override_revenue
        )
        source = _ml_source(args, dataset) if args.strategy == "milp-ml" else None
        result = run_milp_backtest(dataset, config, params, source)
    out = _out_dir(args)
    result.write(out)
    print(f"strategy: {result.strategy}")
    print(f"total revenue: {result.total_revenue:.2f}")
    print(f"actions: {result.actions_total}")
    print(f"actions per day: {result.actions_per_day_mean:.3f}")
    return 0


def cmd_sweep(args) -> int:
    dataset = _load(args)
    config = _battery(args)
    grid = sweeps.SweepGrid(
        args.buy_range or sweeps.SweepGrid.buy_range,
        args.sell_range or sweeps.SweepGrid.sell_range,
        tuple(args.extended or ()),
        tuple(range(args.actions_min, args.actions_max + 1)),
    )
    out = _out_dir(args)
    heatmap = sweeps.threshold_sweep(dataset, config, grid, args.max_actions, args.jobs)
    sweeps.write_heatmap(heatmap, out / "heatmap.csv")
    curve = sweeps.max_actions_sweep(
        dataset, config, BaselineParams(args.charge_price, args.discharge_price), grid.actions_range, args.jobs
    )
    sweeps.write_actions_curve(curve, out / "actions_curve.csv")
    if not args.skip_full:
        sweeps.parallel_coords_export(sweeps.full_sweep(dataset, config, grid, args.jobs), out / "parallel_coords.csv")
    b = heatmap.best
    print(f"best cell: buy {b.buy:g}, sell {b.sell:g} -> {b.total_revenue:.2f}")
    for cell in heatmap.extended:
        print(f"extended point: buy {cell.buy:g}, sell {cell.sell:g} -> {cell.total_revenue:.2f}")
    print(f"actions plateau at: {curve.plateau_at}")
    return 0


def cmd_train(args) -> int:
    if not (args.train_start and args.train_end):
        raise CliError("--train-start and --train-end are required")
    train_range = (args.train_start, args.train_end)
    test_range = (args.test_start, args.test_end) if args.test_start and args.test_end else None
    forecast_ml.check_disjoint(train_range, test_range)
    full = _load(args)
    train_ds = full.slice(*train_range)
    if len(train_ds.settlements) == 0:
        raise CliError("no settlements in the training range")
    params = ForestParams(args.n_trees, args.max_depth, args.min_split, args.min_leaf, args.max_features)
    model = forecast_ml.train(train_ds, params, args.seed, test_range)
    out = _out_dir(args)
    model_path = Path(args.model) if args.model else out / "model.json"
    forecast_ml.save_model(model, model_path)
    summary = {"model": str(model_path), "seed": args.seed, **model.meta}
    if test_range is not None:
        test_ds = full.slice(*test_range)
        if len(test_ds.forecasts):
            report = forecast_ml.accuracy_report(model, test_ds, out / "test_accuracy", args.metric)
            err = report["errors"].abs_error
            raw = accuracy.compute_errors(test_ds).abs_error
            summary["test_mae"] = float(np.mean(np.abs(err)))
            summary["test_mae_operator"] = float(np.mean(np.abs(raw)))
    _dump_json(out / "train_summary.json", summary)
    print(f"model written: {model_path}")
    print(f"training rows: {model.meta['train_rows']}, rmse {model.meta['train_rmse']:.3f}")
    if "test_mae" in summary:
        print(f"test MAE: model {summary['test_mae']:.3f}, operator {summary['test_mae_operator']:.3f}")
    return 0


def _cash_model(args) -> finance.CashModel:
    return finance.CashModel(args.capex, args.opex, args.years, args.rate)


def _finance_outputs(args, reports) -> int:
    out = _out_dir(args)
    finance.write_reports(reports, out / "finance.json", out / "finance.csv")
    for r in reports:
        pay = "non-recoverable" if r.payback_years is None else f"{r.payback_years:.2f} y"
        rate = "undefined" if r.irr is None else f"{100 * r.irr:.2f}%"
        print(f"{r.strategy}: cashflow {r.annual_cashflow:.0f}, NPV {r.npv:.0f}, payback {pay}, IRR {rate}")
    return 0


def cmd_finance(args) -> int:
    model = _cash_model(args)
    reports = [finance.report(f"cashflow-{cf:g}", model=model, cashflow=cf) for cf in args.cashflow or ()]
    reports += [finance.report(f"revenue-{rev:g}", rev, model) for rev in args.revenue or ()]
    if not reports:
        raise CliError("give at least one --cashflow or --revenue")
    return _finance_outputs(args, reports)


def cmd_report(args) -> int:
    model = _cash_model(args)
    reports = []
    for path in args.results:
        summary = json.loads(Path(path).read_text())
        days = summary.get("n_days") or 0
        if not days:
            raise CliError(f"{path}: result covers no days")
        # scale to a 365-day year so partial-year backtests compare
        annual = summary["total_revenue"] * 365.0 / days
        reports.append(finance.report(summary["strategy"], annual, model))
    return _finance_outputs(args, reports)


# -------------------------------------------------------------- parser


def _common(p, cache_required=True) -> None:
    g = p.add_argument_group("common")
    g.add_argument("--region", default="NSW1", choices=REGIONS)
    g.add_argument("--cache", help="dataset cache file" + ("" if cache_required else " (written)"))
    g.add_argument("--out", default="out", help="output directory")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--jobs", type=int, default=1, help="worker processes")


def _battery_flags(p) -> None:
    g = p.add_argument_group("battery")
    g.add_argument("--capacity", type=float, default=20.0, help="MWh")
    g.add_argument("--power", type=float, default=10.0, help="MW")
    g.add_argument("--degradation", type=float, default=0.00005, help="capacity loss per action")


def _cash_flags(p) -> None:
    g = p.add_argument_group("cash model")
    g.add_argument("--capex", type=float, default=8_000_000.0)
    g.add_argument("--opex", type=float, default=20_000.0)
    g.add_argument("--years", type=int, default=20)
    g.add_argument("--rate", type=float, default=0.055, help="discount rate")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bessarb", description="Battery arbitrage backtesting toolkit.")
    parser.add_argument("--config", help="key = value file supplying defaults")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse CSVs (or synthesise data) into a cache file")
    _common(p, cache_required=False)
    p.add_argument("--dispatch", help="dispatch price CSV")
    p.add_argument("--forecasts", help="pre-dispatch forecast CSV")
    p.add_argument("--synthetic-days", type=int, default=0, help="generate this many synthetic days instead")
    p.add_argument("--synthetic-start", default="2024-01-01")
    p.add_argument("--synthetic-bias", action="store_true", help="add an hour-of-day bias to synthetic forecasts")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("accuracy", help="forecast error profiles and volatility")
    _common(p)
    p.add_argument("--metric", choices=("abs", "pct"), default="abs")
    p.add_argument("--model", help="evaluate a trained model instead of the operator forecasts")
    p.add_argument("--start")
    p.add_argument("--end")
    p.set_defaults(func=cmd_accuracy)

    p = sub.add_parser("backtest", help="run one strategy over the cached data")
    _common(p)
    _battery_flags(p)
    p.add_argument("--strategy", choices=STRATEGIES, default="baseline")
    p.add_argument("--model", help="trained forecast model (milp-ml)")
    p.add_argument("--start")
    p.add_argument("--end")
    p.add_argument("--charge-price", type=float, default=50.0)
    p.add_argument("--discharge-price", type=float, default=150.0)
    p.add_argument("--daily-actions", type=int, help="daily action cap (default 3 baseline, 6 milp)")
    p.add_argument("--lookahead-hours", type=float, default=24.0)
    p.add_argument("--override-revenue", type=float, default=1000.0)
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("sweep", help="threshold heatmap, action-cap curve and parallel-coordinates data")
    _common(p)
    _battery_flags(p)
    p.add_argument("--buy-range", type=_range, help="LO:HI:STEP")
    p.add_argument("--sell-range", type=_range, help="LO:HI:STEP")
    p.add_argument("--extended", type=_pair, action="append", help="extra BUY:SELL point, repeatable")
    p.add_argument("--max-actions", type=int, default=3, help="cap used for the heatmap")
    p.add_argument("--actions-min", type=int, default=1)
    p.add_argument("--actions-max", type=int, default=10)
    p.add_argument("--charge-price", type=float, default=50.0, help="buy threshold for the action-cap curve")
    p.add_argument("--discharge-price", type=float, default=150.0, help="sell threshold for the action-cap curve")
    p.add_argument("--skip-full", action="store_true", help="skip the buy x sell x cap sweep")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("train-forecast", help="fit the forecast-correction forest")
    _common(p)
    p.add_argument("--train-start")
    p.add_argument("--train-end")
    p.add_argument("--test-start")
    p.add_argument("--test-end")
    p.add_argument("--model", help="model output path (default OUT/model.json)")
    p.add_argument("--n-trees", type=int, default=100)
    p.add_argument("--max-depth", type=int, default=10)
    p.add_argument("--min-split", type=int, default=2)
    p.add_argument("--min-leaf", type=int, default=2)
    p.add_argument("--max-features", type=int)
    p.add_argument("--metric", choices=("abs", "pct"), default="abs")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("finance", help="NPV, IRR and payback for given cash flows or revenues")
    p.add_argument("--out", default="out")
    _cash_flags(p)
    p.add_argument("--cashflow", type=float, action="append", help="net annual cash flow, repeatable")
    p.add_argument("--revenue", type=float, action="append", help="annual revenue before opex, repeatable")
    p.set_defaults(func=cmd_finance)

    p = sub.add_parser("report", help="financial verdict for backtest result.json files")
    p.add_argument("results", nargs="+", help="result.json files written by backtest")
    p.add_argument("--out", default="out")
    _cash_flags(p)
    p.set_defaults(func=cmd_report)
    return parser


def _apply_config(parser, argv):
    """Install config-file values as parser defaults so flags still win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    values = read_config(known.config)
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for name, sp in subparsers.choices.items():
        dests = {a.dest: a for a in sp._actions}
        accepted = {}
        for key, value in values.items():
            action = dests.get(key)
            if action is None:
                continue
            if action.type is not None:
                value = action.type(value)
            elif action.const is True or action.const is False:  # store_true flags
                value = value.lower() in ("1", "true", "yes", "on")
            accepted[key] = [value] if isinstance(action, argparse._AppendAction) else value
        sp.set_defaults(**accepted)
    known_keys = {a.dest for sp in subparsers.choices.values() for a in sp._actions}
    unknown = sorted(set(values) - known_keys)
    if unknown:
        raise CliError(f"{known.config}: unknown keys {unknown}")


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
    except (CliError, OSError, argparse.ArgumentTypeError, ValueError) as exc:
        print(f"bessarb: error: {exc}", file=sys.stderr)
        return 2
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CliError, MarketDataError, forecast_ml.LeakageError, OSError, ValueError) as exc:
        print(f"bessarb: error: {exc}", file=sys.stderr)
        return 2 if isinstance(exc, forecast_ml.LeakageError) else 1


if __name__ == "__main__":
    sys.exit(main())
