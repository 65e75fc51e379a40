"""Forecast error statistics and within-day price volatility."""

from __future__ import annotations

import csv
import logging
from dataclasses import astuple, dataclass, fields
from pathlib import Path

import numpy as np

from .market_data import AlignedDataset, SettlementTable

logger = logging.getLogger(__name__)

# Below this |actual| the percentage error is left undefined.
PCT_GUARD = 1.0
Z95 = 1.96

WEEKDAYS = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")
MONTHS = ("Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec")


@dataclass
class ErrorTable:
    """One row per matched (forecast, actual) pair.

    ``abs_error`` is signed, predicted minus actual. ``pct_error`` is NaN
    where the actual price is too close to zero.
    """

    region: str
    settlement_times: np.ndarray
    hours_ahead: np.ndarray
    abs_error: np.ndarray
    pct_error: np.ndarray

    def __len__(self):
        return len(self.abs_error)


@dataclass(frozen=True)
class GroupStats:
    group_key: object
    n: int
    mean: float
    median: float
    q1: float
    q3: float
    ci95_lo: float
    ci95_hi: float


@dataclass(frozen=True)
class VolatilityRecord:
    region: str
    date: object
    stddev: float


def compute_errors(dataset: AlignedDataset, predicted=None) -> ErrorTable:
    """Errors of every matched forecast against its actual price.

    ``predicted`` optionally replaces the operator prices (same order as
    ``dataset.forecasts``), which is how model forecasts are scored.
    """
    mask = dataset.matched
    pred = dataset.forecasts.prices if predicted is None else np.asarray(predicted, dtype=np.float64)
    pred = pred[mask]
    actual = dataset.matched_actuals()
    err = pred - actual
    with np.errstate(divide="ignore", invalid="ignore"):
        pct = np.where(np.abs(actual) >= PCT_GUARD, 100.0 * err / actual, np.nan)
    return ErrorTable(
        dataset.region,
        dataset.forecasts.settlement_times[mask],
        dataset.forecasts.hours_ahead[mask],
        err,
        pct,
    )


def group_stats(key, values) -> GroupStats:
    values = np.asarray(values, dtype=np.float64)
    n = len(values)
    mean = float(values.mean())
    q1, median, q3 = (float(v) for v in np.percentile(values, [25, 50, 75]))
    half = Z95 * float(values.std(ddof=1)) / np.sqrt(n) if n > 1 else 0.0
    return GroupStats(key, n, mean, median, q1, q3, mean - half, mean + half)


def _grouped(keys, values, labels=None):
    finite = np.isfinite(values)
    keys, values = keys[finite], values[finite]
    if len(values) == 0:
        return []
    order = np.argsort(keys, kind="stable")
    keys, values = keys[order], values[order]
    uniq, starts = np.unique(keys, return_index=True)
    bounds = list(starts[1:]) + [len(keys)]
    out = []
    for k, lo, hi in zip(uniq.tolist(), starts, bounds):
        out.append(group_stats(labels[k] if labels else k, values[lo:hi]))
    return out


def _metric(errors: ErrorTable, metric):
    if metric == "abs":
        return errors.abs_error
    if metric == "pct":
        return errors.pct_error
    raise ValueError(f"metric must be 'abs' or 'pct', not {metric!r}")


def horizon_profile(errors: ErrorTable, metric="abs") -> list[GroupStats]:
    """Error statistics by forecast lead time, in 0.5 h buckets."""
    buckets = np.round(errors.hours_ahead * 2.0) / 2.0
    return _grouped(buckets, _metric(errors, metric))


def temporal_profile(errors: ErrorTable, grouping: str, metric="abs") -> list[GroupStats]:
    """Error statistics by hour of day (0-23), weekday (Mon-Sun) or month."""
    minutes = errors.settlement_times.astype(np.int64)
    if grouping == "hour":
        keys = (minutes // 60) % 24
        labels = None
    elif grouping == "weekday":
        days = minutes // 1440
        keys = (days + 3) % 7  # 1970-01-01 was a Thursday
        labels = WEEKDAYS
    elif grouping == "month":
        keys = errors.settlement_times.astype("datetime64[M]").astype(np.int64) % 12
        labels = MONTHS
    else:
        raise ValueError(f"grouping must be hour, weekday or month, not {grouping!r}")
    return _grouped(keys, _metric(errors, metric), labels)


@dataclass
class VolatilityResult:
    records: list
    mean: float
    skipped_days: list


def volatility(settlements: SettlementTable) -> VolatilityResult:
    """Population standard deviation of each complete day's 48 prices.

    Days without exactly 48 half-hour prices are skipped and listed.
    """
    days = settlements.times.astype("datetime64[D]")
    uniq, inverse, counts = np.unique(days, return_inverse=True, return_counts=True)
    records, skipped = [], []
    for i, day in enumerate(uniq):
        if counts[i] != 48:
            skipped.append(day.item())
            continue
        prices = settlements.prices[inverse == i]
        records.append(VolatilityRecord(settlements.region, day.item(), float(np.std(prices))))
    if skipped:
        logger.info("volatility: skipped %d partial days", len(skipped))
    if not records:
        logger.warning("volatility: no complete days for %s", settlements.region)
        return VolatilityResult([], float("nan"), skipped)
    mean = float(np.mean([r.stddev for r in records]))
    return VolatilityResult(records, mean, skipped)


# ------------------------------------------------------------- exports


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def write_group_stats(stats, path) -> None:
    _write_rows(path, [f.name for f in fields(GroupStats)], (astuple(s) for s in stats))


def write_volatility(result: VolatilityResult, path) -> None:
    _write_rows(path, [f.name for f in fields(VolatilityRecord)], (astuple(r) for r in result.records))


def export_all(dataset: AlignedDataset, out_dir, predicted=None, metric="abs") -> list[Path]:
    """Write the horizon, temporal and volatility CSVs into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    errors = compute_errors(dataset, predicted)
    written = []
    path = out / "horizon_profile.csv"
    write_group_stats(horizon_profile(errors, metric), path)
    written.append(path)
    for grouping in ("hour", "weekday", "month"):
        path = out / f"temporal_profile_{grouping}.csv"
        write_group_stats(temporal_profile(errors, grouping, metric), path)
        written.append(path)
    path = out / "volatility.csv"
    write_volatility(volatility(dataset.settlements), path)
    written.append(path)
    return written
