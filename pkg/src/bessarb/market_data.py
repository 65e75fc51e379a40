"""Ingestion of dispatch prices and pre-dispatch forecasts.

Inputs are the canonical CSV layouts::

    region,settlement_time,price
    region,settlement_time,made_time,predicted_price

Timestamps are timezone-naive market time and label the *end* of their
interval, so the 5-minute rows 00:05 .. 00:30 make up the 00:30 half hour.
Collections are held column-wise in numpy arrays; individual records are
available through ``records()`` for code that prefers objects.
"""

from __future__ import annotations

import datetime as dt
import logging
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

REGIONS = ("NSW1", "QLD1", "SA1", "VIC1", "TAS1")

# Minutes since the epoch, the unit used for every timestamp array.
TIME_UNIT = "datetime64[m]"
HALF_HOUR = np.timedelta64(30, "m")

# Product tags treated as the regional reference (energy) price when a
# dispatch file carries a product column.
ENERGY_PRODUCTS = {"", "RRP", "ENERGY"}


class MarketDataError(ValueError):
    """Raised for malformed or inconsistent market data."""


class ParseError(MarketDataError):
    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


class GapError(MarketDataError):
    def __init__(self, windows):
        self.windows = list(windows)
        shown = ", ".join(str(w) for w in self.windows[:5])
        more = "" if len(self.windows) <= 5 else f" (+{len(self.windows) - 5} more)"
        super().__init__(f"incomplete half-hour windows: {shown}{more}")


class CacheError(MarketDataError):
    """Cache file is missing, corrupt or from another format version."""


def check_region(region: str) -> str:
    if region not in REGIONS:
        raise MarketDataError(f"unknown region {region!r}; expected one of {REGIONS}")
    return region


def to_minutes(values) -> np.ndarray:
    """Coerce timestamps (strings, datetimes, datetime64) to ``datetime64[m]``."""
    return np.asarray(pd.to_datetime(values).values, dtype="datetime64[ns]").astype(TIME_UNIT)


@dataclass(frozen=True)
class SettlementRecord:
    region: str
    settlement_time: dt.datetime
    actual_price: float


@dataclass(frozen=True)
class ForecastRecord:
    region: str
    settlement_time: dt.datetime
    made_time: dt.datetime
    predicted_price: float

    @property
    def hours_ahead(self) -> float:
        return (self.settlement_time - self.made_time).total_seconds() / 3600.0


@dataclass
class SettlementTable:
    """Actual prices for one region, column-wise."""

    region: str
    times: np.ndarray
    prices: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=TIME_UNIT)
        self.prices = np.asarray(self.prices, dtype=np.float64)
        if self.times.shape != self.prices.shape:
            raise MarketDataError("times and prices differ in length")

    def __len__(self):
        return len(self.times)

    def records(self) -> Iterator[SettlementRecord]:
        for t, p in zip(self.times.tolist(), self.prices.tolist()):
            yield SettlementRecord(self.region, t, p)

    @classmethod
    def from_records(cls, records) -> "SettlementTable":
        records = list(records)
        if not records:
            raise MarketDataError("no settlement records")
        regions = {r.region for r in records}
        if len(regions) != 1:
            raise MarketDataError(f"mixed regions {sorted(regions)}")
        return cls(
            regions.pop(),
            to_minutes([r.settlement_time for r in records]),
            [r.actual_price for r in records],
        )


@dataclass
class ForecastTable:
    """Operator forecasts for one region, column-wise."""

    region: str
    settlement_times: np.ndarray
    made_times: np.ndarray
    prices: np.ndarray

    def __post_init__(self):
        self.settlement_times = np.asarray(self.settlement_times, dtype=TIME_UNIT)
        self.made_times = np.asarray(self.made_times, dtype=TIME_UNIT)
        self.prices = np.asarray(self.prices, dtype=np.float64)
        n = len(self.settlement_times)
        if len(self.made_times) != n or len(self.prices) != n:
            raise MarketDataError("forecast columns differ in length")

    def __len__(self):
        return len(self.settlement_times)

    @property
    def hours_ahead(self) -> np.ndarray:
        delta = (self.settlement_times - self.made_times).astype(np.int64)
        return delta / 60.0

    def records(self) -> Iterator[ForecastRecord]:
        cols = zip(self.settlement_times.tolist(), self.made_times.tolist(), self.prices.tolist())
        for st, mt, p in cols:
            yield ForecastRecord(self.region, st, mt, p)

    def take(self, index) -> "ForecastTable":
        return ForecastTable(
            self.region, self.settlement_times[index], self.made_times[index], self.prices[index]
        )

    def with_prices(self, prices) -> "ForecastTable":
        return ForecastTable(self.region, self.settlement_times, self.made_times, prices)

    @classmethod
    def from_records(cls, records, region=None) -> "ForecastTable":
        records = list(records)
        if region is None:
            if not records:
                raise MarketDataError("region needed for an empty forecast table")
            region = records[0].region
        if any(r.region != region for r in records):
            raise MarketDataError("mixed regions in forecast records")
        return cls(
            region,
            to_minutes([r.settlement_time for r in records]) if records else np.array([], TIME_UNIT),
            to_minutes([r.made_time for r in records]) if records else np.array([], TIME_UNIT),
            [r.predicted_price for r in records],
        )


@dataclass
class AlignedDataset:
    """Settlements and forecasts for a region, joined on settlement time.

    ``forecasts`` is sorted by (settlement_time, made_time). ``matched[i]``
    tells whether forecast ``i`` targets a settlement present in the data
    and ``actual_index[i]`` points at it (``-1`` when unmatched).
    """

    region: str
    settlements: SettlementTable
    forecasts: ForecastTable
    matched: np.ndarray = field(default=None)
    actual_index: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.actual_index is None:
            self.actual_index = _match_index(self.settlements.times, self.forecasts.settlement_times)
        self.actual_index = np.asarray(self.actual_index, dtype=np.int64)
        self.matched = self.actual_index >= 0

    @property
    def unmatched_count(self) -> int:
        return int((~self.matched).sum())

    def matched_forecasts(self) -> ForecastTable:
        return self.forecasts.take(self.matched)

    def matched_actuals(self) -> np.ndarray:
        return self.settlements.prices[self.actual_index[self.matched]]

    def slice(self, start=None, end=None) -> "AlignedDataset":
        """Restrict to settlements with ``start <= time < end``.

        Forecasts are filtered on their settlement time the same way.
        """
        lo = np.datetime64(start, "m") if start is not None else None
        hi = np.datetime64(end, "m") if end is not None else None

        def keep(times):
            mask = np.ones(len(times), dtype=bool)
            if lo is not None:
                mask &= times >= lo
            if hi is not None:
                mask &= times < hi
            return mask

        s = keep(self.settlements.times)
        f = keep(self.forecasts.settlement_times)
        settlements = SettlementTable(self.region, self.settlements.times[s], self.settlements.prices[s])
        return AlignedDataset(self.region, settlements, self.forecasts.take(f))


def _match_index(settle_times, target_times):
    pos = np.searchsorted(settle_times, target_times)
    pos_c = np.minimum(pos, max(len(settle_times) - 1, 0))
    hit = (pos < len(settle_times)) & (settle_times[pos_c] == target_times) if len(settle_times) else np.zeros(len(target_times), bool)
    return np.where(hit, pos_c, -1)


# ---------------------------------------------------------------- parsing


def _read_csv(path, required):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise ParseError(path, 1, f"missing columns {missing}")
    return frame


def _parse_times(path, column, values):
    parsed = pd.to_datetime(values, format="ISO8601", errors="coerce")
    bad = np.flatnonzero(parsed.isna().to_numpy())
    if len(bad):
        raise ParseError(path, int(bad[0]) + 2, f"bad {column} {values.iloc[bad[0]]!r}")
    return np.asarray(parsed.values, dtype="datetime64[ns]").astype(TIME_UNIT)


def _parse_prices(path, column, values):
    prices = pd.to_numeric(values, errors="coerce").to_numpy(dtype=np.float64)
    bad = np.flatnonzero(~np.isfinite(prices))
    if len(bad):
        raise ParseError(path, int(bad[0]) + 2, f"bad {column} {values.iloc[bad[0]]!r}")
    return prices


def parse_dispatch(path, region: str) -> SettlementTable:
    """Read a dispatch price CSV and keep the regional reference price.

    Extra price columns (frequency response, cumulative or override prices)
    are ignored. When a ``product`` column is present, only energy rows
    (``RRP``/``ENERGY``/blank) are kept. Rows are returned in time order.
    """
    check_region(region)
    frame = _read_csv(path, ["region", "settlement_time", "price"])
    if "product" in frame.columns:
        frame = frame[frame["product"].str.strip().str.upper().isin(ENERGY_PRODUCTS)]
    frame = frame[frame["region"].str.strip() == region]
    times = _parse_times(path, "settlement_time", frame["settlement_time"])
    prices = _parse_prices(path, "price", frame["price"])
    order = np.argsort(times, kind="stable")
    times, prices = times[order], prices[order]
    dup = np.flatnonzero(times[1:] == times[:-1])
    if len(dup):
        raise ParseError(path, int(frame.index[order[dup[0] + 1]]) + 2, f"duplicate settlement_time {times[dup[0]]}")
    logger.info("parsed %d dispatch rows for %s from %s", len(times), region, path)
    return SettlementTable(region, times, prices)


def resample_to_30min(table: SettlementTable) -> SettlementTable:
    """Average 5-minute prices into half-hour settlement prices.

    Half-hourly input is returned unchanged. Each half hour ending at ``T``
    needs all six rows ``T-25min .. T``; otherwise :class:`GapError`.
    """
    times = table.times
    if len(times) == 0:
        return table
    minutes = times.astype(np.int64)
    if np.all(minutes % 30 == 0) and (len(times) < 2 or np.all(np.diff(minutes) >= 30)):
        return table
    if np.any(minutes % 5):
        raise MarketDataError("timestamps are not on 5-minute boundaries")
    window = -((-minutes) // 30) * 30  # ceil to the half hour
    keys, inverse, counts = np.unique(window, return_inverse=True, return_counts=True)
    short = keys[counts != 6]
    if len(short):
        raise GapError([np.datetime64(int(k), "m") for k in short])
    sums = np.zeros(len(keys))
    np.add.at(sums, inverse, table.prices)
    return SettlementTable(table.region, keys.astype(TIME_UNIT), sums / 6.0)


@dataclass
class ForecastParseReport:
    kept: int = 0
    too_close: int = 0
    rejected: int = 0
    rejected_lines: list = field(default_factory=list)


def parse_predispatch(path, region: str, report: ForecastParseReport | None = None) -> ForecastTable:
    """Read a pre-dispatch forecast CSV.

    Forecasts less than half an hour ahead are dropped. Rows whose made time
    lies after the settlement time are rejected and counted in ``report``.
    """
    check_region(region)
    frame = _read_csv(path, ["region", "settlement_time", "made_time", "predicted_price"])
    frame = frame[frame["region"].str.strip() == region]
    st = _parse_times(path, "settlement_time", frame["settlement_time"])
    mt = _parse_times(path, "made_time", frame["made_time"])
    prices = _parse_prices(path, "predicted_price", frame["predicted_price"])
    ahead = (st - mt).astype(np.int64)
    rejected = ahead < 0
    too_close = ~rejected & (ahead < 30)
    keep = ahead >= 30
    if report is not None:
        report.rejected += int(rejected.sum())
        report.too_close += int(too_close.sum())
        report.kept += int(keep.sum())
        report.rejected_lines.extend((frame.index[rejected] + 2).tolist())
    if rejected.any():
        logger.warning("%s: %d forecast rows made after their settlement time", path, int(rejected.sum()))
    return ForecastTable(region, st[keep], mt[keep], prices[keep])


def align(settlements: SettlementTable, forecasts: ForecastTable, region: str | None = None) -> AlignedDataset:
    """Join forecasts to actual prices on settlement time.

    Forecasts whose target lies outside the settlement data are kept but
    flagged unmatched.
    """
    region = region or settlements.region
    check_region(region)
    if settlements.region != region or forecasts.region != region:
        raise MarketDataError(
            f"region mismatch: settlements {settlements.region}, forecasts {forecasts.region}, expected {region}"
        )
    if len(settlements) == 0:
        raise MarketDataError("no settlements to align")
    times = settlements.times
    if np.any(times.astype(np.int64) % 30):
        raise MarketDataError("settlements must be half-hourly; resample first")
    if np.any(np.diff(times.astype(np.int64)) <= 0):
        raise MarketDataError("settlement times must be strictly increasing")
    order = np.lexsort((forecasts.made_times, forecasts.settlement_times))
    dataset = AlignedDataset(region, settlements, forecasts.take(order))
    if dataset.unmatched_count:
        logger.info("%d of %d forecasts have no matching actual", dataset.unmatched_count, len(forecasts))
    return dataset


# ----------------------------------------------------------------- cache

CACHE_MAGIC = b"BESC"
CACHE_VERSION = 1
_HEADER = struct.Struct("<4sI8sQQ")


def cache_write(dataset: AlignedDataset, path) -> None:
    """Write ``dataset`` to a single binary file.

    Layout: magic, version, region, settlement count, forecast count, then
    the raw little-endian arrays and a CRC32 of everything before it.
    """
    s, f = dataset.settlements, dataset.forecasts
    body = b"".join(
        [
            _HEADER.pack(CACHE_MAGIC, CACHE_VERSION, dataset.region.encode().ljust(8), len(s), len(f)),
            s.times.astype("<i8").tobytes(),
            s.prices.astype("<f8").tobytes(),
            f.settlement_times.astype("<i8").tobytes(),
            f.made_times.astype("<i8").tobytes(),
            f.prices.astype("<f8").tobytes(),
        ]
    )
    Path(path).write_bytes(body + struct.pack("<I", zlib.crc32(body)))


def cache_read(path) -> AlignedDataset:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise CacheError(f"cannot read cache {path}: {exc}") from exc
    if len(raw) < _HEADER.size + 4:
        raise CacheError(f"{path}: truncated cache file")
    magic, version, region, ns, nf = _HEADER.unpack_from(raw)
    if magic != CACHE_MAGIC:
        raise CacheError(f"{path}: not a cache file (magic {magic!r})")
    if version != CACHE_VERSION:
        raise CacheError(f"{path}: cache version {version}, expected {CACHE_VERSION}")
    expected = _HEADER.size + 16 * ns + 24 * nf + 4
    if len(raw) != expected:
        raise CacheError(f"{path}: size {len(raw)} does not match header ({expected})")
    (crc,) = struct.unpack_from("<I", raw, len(raw) - 4)
    if zlib.crc32(raw[:-4]) != crc:
        raise CacheError(f"{path}: checksum mismatch")

    offset = _HEADER.size

    def take(n, dtype):
        nonlocal offset
        arr = np.frombuffer(raw, dtype=dtype, count=n, offset=offset)
        offset += n * 8
        return arr.copy()

    region = region.rstrip().decode()
    settlements = SettlementTable(region, take(ns, "<i8").astype(TIME_UNIT), take(ns, "<f8"))
    forecasts = ForecastTable(
        region, take(nf, "<i8").astype(TIME_UNIT), take(nf, "<i8").astype(TIME_UNIT), take(nf, "<f8")
    )
    return AlignedDataset(region, settlements, forecasts)


def datasets_equal(a: AlignedDataset, b: AlignedDataset) -> bool:
    """Bit-level equality of two datasets (prices compared as raw bytes)."""
    return (
        a.region == b.region
        and np.array_equal(a.settlements.times, b.settlements.times)
        and a.settlements.prices.tobytes() == b.settlements.prices.tobytes()
        and np.array_equal(a.forecasts.settlement_times, b.forecasts.settlement_times)
        and np.array_equal(a.forecasts.made_times, b.forecasts.made_times)
        and a.forecasts.prices.tobytes() == b.forecasts.prices.tobytes()
    )


def write_dispatch_csv(table: SettlementTable, path) -> None:
    frame = pd.DataFrame(
        {
            "region": table.region,
            "settlement_time": pd.to_datetime(table.times).strftime("%Y-%m-%dT%H:%M"),
            "price": table.prices,
        }
    )
    frame.to_csv(path, index=False, float_format="%.17g")


def write_forecast_csv(table: ForecastTable, path) -> None:
    frame = pd.DataFrame(
        {
            "region": table.region,
            "settlement_time": pd.to_datetime(table.settlement_times).strftime("%Y-%m-%dT%H:%M"),
            "made_time": pd.to_datetime(table.made_times).strftime("%Y-%m-%dT%H:%M"),
            "predicted_price": table.prices,
        }
    )
    frame.to_csv(path, index=False, float_format="%.17g")
