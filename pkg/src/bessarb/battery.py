"""Storage asset simulation: state of charge, degradation and trade ledger."""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field

CHARGE = "charge"
DISCHARGE = "discharge"


@dataclass(frozen=True)
class BatteryConfig:
    """Physical and commercial parameters of the battery.

    ``soc_init_fraction`` sets the starting state of charge as a share of
    capacity; backtests use one half.
    """

    capacity_init: float = 20.0
    power_max: float = 10.0
    degradation_rate: float = 0.00005
    period_hours: float = 0.5
    capex: float = 8_000_000.0
    soc_init_fraction: float = 0.5

    def __post_init__(self):
        for name in ("capacity_init", "power_max", "degradation_rate", "period_hours", "capex"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive, got {value!r}")
        if self.degradation_rate >= 1:
            raise ValueError("degradation_rate must be below 1")
        if self.period_hours != 0.5:
            raise ValueError("only half-hour settlement periods are supported")
        if not 0 <= self.soc_init_fraction <= 1:
            raise ValueError("soc_init_fraction must lie in [0, 1]")

    @property
    def energy_per_period(self) -> float:
        """Largest energy one action may move (MWh)."""
        return self.power_max * self.period_hours


@dataclass(frozen=True)
class LedgerEntry:
    settlement_time: object
    action: str
    energy: float
    price: float
    cash_delta: float
    soc_after: float
    capacity_after: float
    expected_revenue: float | None = None
    override: bool = False


@dataclass
class TradeLedger:
    """Append-only record of executed trades."""

    entries: list = field(default_factory=list)
    total_revenue: float = 0.0

    def append(self, entry: LedgerEntry) -> None:
        self.entries.append(entry)
        self.total_revenue += entry.cash_delta

    def resummed(self) -> float:
        return math.fsum(e.cash_delta for e in self.entries)

    def replayed(self) -> float:
        total = 0.0
        for e in self.entries:
            total += e.cash_delta
        return total

    def __len__(self):
        return len(self.entries)

    def to_csv(self, path) -> None:
        header = ["settlement_time", "action", "energy_mwh", "price", "cash_delta", "soc_after", "capacity_after"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for e in self.entries:
                when = e.settlement_time.isoformat() if hasattr(e.settlement_time, "isoformat") else e.settlement_time
                writer.writerow(
                    [when, e.action, repr(e.energy), repr(e.price), repr(e.cash_delta), repr(e.soc_after), repr(e.capacity_after)]
                )


@dataclass
class BatteryState:
    config: BatteryConfig
    capacity_max: float
    soc: float
    actions_today: int = 0
    current_date: dt.date | None = None
    actions_total: int = 0
    degradation_loss: float = 0.0

    def check(self) -> None:
        assert 0.0 <= self.soc <= self.capacity_max <= self.config.capacity_init, self
        assert self.actions_today >= 0


def new_state(config: BatteryConfig) -> BatteryState:
    return BatteryState(
        config=config,
        capacity_max=config.capacity_init,
        soc=config.soc_init_fraction * config.capacity_init,
    )


def roll_date(state: BatteryState, new_date) -> None:
    """Reset the daily action counter when the calendar date changes."""
    if state.current_date is not None and new_date < state.current_date:
        raise ValueError(f"date moved backwards: {new_date} < {state.current_date}")
    if new_date != state.current_date:
        state.current_date = new_date
        state.actions_today = 0


def _degrade(state: BatteryState) -> None:
    state.capacity_max *= 1.0 - state.config.degradation_rate
    if state.soc > state.capacity_max:
        state.degradation_loss += state.soc - state.capacity_max
        state.soc = state.capacity_max
    state.actions_today += 1
    state.actions_total += 1


def execute_charge(
    state: BatteryState,
    market_price: float,
    bid_price: float,
    ledger: TradeLedger,
    when=None,
    max_energy: float | None = None,
    expected_revenue: float | None = None,
    override: bool = False,
) -> bool:
    """Try to buy energy at ``market_price`` with a bid of ``bid_price``.

    The bid clears when the market price is at or below it. ``max_energy``
    further caps the amount (the optimiser's planned quantity). Returns
    whether the trade executed; a rejected bid leaves everything untouched.
    """
    if not (market_price <= bid_price and state.soc < state.capacity_max):
        return False
    energy = min(state.config.energy_per_period, state.capacity_max - state.soc)
    if max_energy is not None:
        energy = min(energy, max_energy)
    if energy <= 0:
        return False
    state.soc += energy
    _degrade(state)
    ledger.append(
        LedgerEntry(when, CHARGE, energy, market_price, -energy * market_price, state.soc, state.capacity_max,
                    expected_revenue, override)
    )
    return True


def execute_discharge(
    state: BatteryState,
    market_price: float,
    offer_price: float,
    ledger: TradeLedger,
    when=None,
    max_energy: float | None = None,
    expected_revenue: float | None = None,
    override: bool = False,
) -> bool:
    """Try to sell energy; the offer clears when the market meets or beats it."""
    if not (market_price >= offer_price and state.soc > 0):
        return False
    energy = min(state.config.energy_per_period, state.soc)
    if max_energy is not None:
        energy = min(energy, max_energy)
    if energy <= 0:
        return False
    state.soc = max(state.soc - energy, 0.0)
    _degrade(state)
    ledger.append(
        LedgerEntry(when, DISCHARGE, energy, market_price, energy * market_price, state.soc, state.capacity_max,
                    expected_revenue, override)
    )
    return True
