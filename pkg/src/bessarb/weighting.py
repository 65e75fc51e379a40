"""Inverse-lead-time weighting of forecasts available at decision time.

Every forecast for a target period that was published at or before the
decision time contributes with weight ``1 / hours_ahead``, so the most
recent forecasts dominate.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .market_data import AlignedDataset, ForecastTable

_NEVER = np.iinfo(np.int64).max


@dataclass(frozen=True)
class WeightedForecast:
    settlement_time: np.datetime64
    price: float
    contributing: int
    latest_made: np.datetime64


def weighted_forecast(hours_ahead, prices):
    """Weighted mean of ``prices`` with weights ``1 / hours_ahead``.

    Returns ``None`` when there is nothing to average.
    """
    hours_ahead = np.asarray(hours_ahead, dtype=np.float64)
    prices = np.asarray(prices, dtype=np.float64)
    if len(prices) == 0:
        return None
    if np.any(hours_ahead < 0.5):
        raise ValueError("forecasts must be at least half an hour ahead")
    w = 1.0 / hours_ahead
    # offsets from a member price keep the result exact when all prices agree
    ref = prices[0]
    return float(ref + np.dot(w, prices - ref) / w.sum())


def weighted_forecast_records(records, now) -> WeightedForecast | None:
    """Collapse :class:`ForecastRecord` objects for one target period."""
    records = list(records)
    if not records:
        return None
    now = np.datetime64(now, "m")
    targets = {np.datetime64(r.settlement_time, "m") for r in records}
    if len(targets) != 1:
        raise ValueError("records target more than one settlement period")
    made = [np.datetime64(r.made_time, "m") for r in records]
    if any(m > now for m in made):
        raise ValueError("a forecast was published after the decision time")
    target = targets.pop()
    if target <= now:
        raise ValueError("target period is not in the future")
    price = weighted_forecast([r.hours_ahead for r in records], [r.predicted_price for r in records])
    return WeightedForecast(target, price, len(records), max(made))


@dataclass
class Lookahead:
    forecasts: list
    omitted: list = field(default_factory=list)

    @property
    def times(self):
        return [f.settlement_time for f in self.forecasts]

    @property
    def prices(self):
        return [f.price for f in self.forecasts]


class ForecastSource:
    """Indexed forecasts serving weighted look-ahead curves.

    Parameters
    ----------
    forecasts : ForecastTable
        Forecast records, in any order.
    prices : array_like, optional
        Replacement prices aligned with ``forecasts`` (model output).
    name : str
        Label carried into results, e.g. ``"raw"``.
    """

    def __init__(self, forecasts: ForecastTable, prices=None, name="raw"):
        self.name = name
        prices = forecasts.prices if prices is None else np.asarray(prices, dtype=np.float64)
        st = forecasts.settlement_times.astype(np.int64)
        mt = forecasts.made_times.astype(np.int64)
        order = np.lexsort((mt, st))
        st, mt, prices = st[order], mt[order], prices[order]
        ahead = (st - mt) / 60.0
        if np.any(ahead < 0.5):
            raise ValueError("forecast source needs hours_ahead >= 0.5 everywhere")
        self.targets, starts, counts = np.unique(st, return_index=True, return_counts=True)
        width = int(counts.max()) if len(counts) else 1
        n = len(self.targets)
        col = np.arange(len(st)) - np.repeat(starts, counts)
        row = np.repeat(np.arange(n), counts)
        self._made = np.full((n, width), _NEVER, dtype=np.int64)
        self._w = np.zeros((n, width))
        self._p = np.zeros((n, width))
        self._made[row, col] = mt
        self._w[row, col] = 1.0 / ahead
        self._p[row, col] = prices
        self.audit_violations = 0

    @classmethod
    def from_dataset(cls, dataset: AlignedDataset, prices=None, name="raw"):
        return cls(dataset.forecasts, prices, name)

    def lookahead(self, now, horizon_hours=24.0) -> Lookahead:
        """Weighted prices for every half hour in ``(now, now + horizon]``.

        Periods with no forecast published by ``now`` are listed in
        ``omitted`` instead of being filled.
        """
        now = np.datetime64(now, "m")
        now_i = now.astype(np.int64)
        if now_i % 30:
            raise ValueError(f"decision time {now} is not on a half-hour boundary")
        steps = int(round(horizon_hours * 2))
        wanted = now_i + 30 * np.arange(1, steps + 1)
        lo, hi = np.searchsorted(self.targets, [wanted[0], wanted[-1] + 1]) if steps else (0, 0)
        rows = slice(lo, hi)
        available = self._made[rows] <= now_i
        prices = self._p[rows]
        # each row is sorted by made time, so column 0 is available whenever any is
        ref = prices[:, :1]
        w = np.where(available, self._w[rows], 0.0)
        den = w.sum(axis=1)
        num = (w * (prices - ref)).sum(axis=1)
        contributing = available.sum(axis=1)
        latest = np.where(available, self._made[rows], np.iinfo(np.int64).min).max(axis=1, initial=np.iinfo(np.int64).min)
        self.audit_violations += int((latest > now_i).sum())
        out = []
        have = set()
        for k in np.flatnonzero(contributing):
            t = self.targets[lo + k]
            have.add(int(t))
            out.append(
                WeightedForecast(
                    np.datetime64(int(t), "m"),
                    float(ref[k, 0] + num[k] / den[k]),
                    int(contributing[k]),
                    np.datetime64(int(latest[k]), "m"),
                )
            )
        omitted = [np.datetime64(int(t), "m") for t in wanted if int(t) not in have]
        return Lookahead(out, omitted)


def lookahead_prices(dataset_or_source, now, horizon_hours=24.0) -> Lookahead:
    source = dataset_or_source
    if isinstance(source, AlignedDataset):
        source = ForecastSource.from_dataset(source)
    return source.lookahead(now, horizon_hours)


def write_weighted_forecasts(lookahead: Lookahead, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["settlement_time", "price", "contributing"])
        for f in lookahead.forecasts:
            writer.writerow([np.datetime_as_string(f.settlement_time, unit="m"), repr(f.price), f.contributing])

