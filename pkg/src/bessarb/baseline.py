"""Forecast-unaware threshold strategy.

Each period the battery bids to charge at a fixed price while it is below
half of its (degraded) capacity and offers to discharge at a fixed price
otherwise. Actual prices clear the bids; no forecast is consulted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .battery import (
    CHARGE,
    DISCHARGE,
    BatteryConfig,
    TradeLedger,
    execute_charge,
    execute_discharge,
    new_state,
    roll_date,
)
from .market_data import AlignedDataset, SettlementTable
from .results import BacktestResult, count_days


@dataclass(frozen=True)
class BaselineParams:
    charge_bid: float = 50.0
    discharge_offer: float = 150.0
    daily_action_max: int = 3


def decide_bid(state, params: BaselineParams) -> tuple[str, float]:
    if state.soc < 0.5 * state.capacity_max:
        return CHARGE, params.charge_bid
    return DISCHARGE, params.discharge_offer


def run_baseline_backtest(data, config: BatteryConfig = BatteryConfig(), params: BaselineParams = BaselineParams()) -> BacktestResult:
    """Replay actual prices through the threshold rule.

    ``data`` is an :class:`AlignedDataset` or a bare :class:`SettlementTable`.
    """
    settlements: SettlementTable = data.settlements if isinstance(data, AlignedDataset) else data
    state = new_state(config)
    ledger = TradeLedger()
    times = settlements.times
    stamps = times.tolist()
    cumulative = np.empty(len(times))
    for i, (when, price) in enumerate(zip(stamps, settlements.prices.tolist())):
        roll_date(state, when.date())
        if state.actions_today < params.daily_action_max:
            action, bid = decide_bid(state, params)
            if action == CHARGE:
                execute_charge(state, price, bid, ledger, when)
            else:
                execute_discharge(state, price, bid, ledger, when)
        cumulative[i] = ledger.total_revenue
    return BacktestResult(
        "baseline",
        ledger,
        times,
        cumulative,
        count_days(times),
        {
            "charge_bid": params.charge_bid,
            "discharge_offer": params.discharge_offer,
            "daily_action_max": params.daily_action_max,
            "final_capacity": state.capacity_max,
            "final_soc": state.soc,
        },
    )
