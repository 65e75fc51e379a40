"""Backtest result container and its file exports."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .battery import CHARGE, TradeLedger


@dataclass
class BacktestResult:
    strategy: str
    ledger: TradeLedger
    times: np.ndarray
    cumulative_revenue: np.ndarray
    n_days: int
    info: dict = field(default_factory=dict)

    @property
    def total_revenue(self) -> float:
        return self.ledger.total_revenue

    @property
    def actions_total(self) -> int:
        return len(self.ledger)

    @property
    def actions_per_day_mean(self) -> float:
        return self.actions_total / self.n_days if self.n_days else 0.0

    def hourly_histogram(self) -> np.ndarray:
        """Counts of executed actions per hour; column 0 charges, 1 discharges."""
        hist = np.zeros((24, 2), dtype=np.int64)
        for e in self.ledger.entries:
            hist[e.settlement_time.hour, 0 if e.action == CHARGE else 1] += 1
        return hist

    def summary(self) -> dict:
        hist = self.hourly_histogram()
        return {
            "strategy": self.strategy,
            "total_revenue": self.total_revenue,
            "actions_total": self.actions_total,
            "actions_per_day_mean": self.actions_per_day_mean,
            "n_days": self.n_days,
            "hourly_histogram": {"charge": hist[:, 0].tolist(), "discharge": hist[:, 1].tolist()},
            "cumulative_revenue_csv": "cumulative_revenue.csv",
            **self.info,
        }

    def write(self, out_dir) -> list[Path]:
        """Write result JSON, ledger, cumulative revenue and histogram files."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / "result.json", out / "ledger.csv", out / "cumulative_revenue.csv", out / "hourly_histogram.csv"]
        paths[0].write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")
        self.ledger.to_csv(paths[1])
        with open(paths[2], "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["settlement_time", "cumulative_revenue"])
            for t, v in zip(np.datetime_as_string(self.times, unit="m"), self.cumulative_revenue.tolist()):
                writer.writerow([t, repr(v)])
        hist = self.hourly_histogram()
        with open(paths[3], "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["hour", "charge", "discharge"])
            for hour in range(24):
                writer.writerow([hour, int(hist[hour, 0]), int(hist[hour, 1])])
        return paths


def count_days(times) -> int:
    return len(np.unique(np.asarray(times).astype("datetime64[D]")))
