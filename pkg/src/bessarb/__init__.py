"""Backtesting toolkit for battery energy arbitrage on half-hourly markets.

Forecast accuracy analysis, a threshold strategy, a rolling-horizon
optimiser fed by raw or ML-corrected forecasts, parameter sweeps and a
discounted-cash-flow verdict.
"""

from .baseline import BaselineParams, run_baseline_backtest
from .battery import BatteryConfig, BatteryState, TradeLedger, execute_charge, execute_discharge, new_state
from .finance import CashModel, FinanceReport, irr, npv, payback, report
from .market_data import (
    AlignedDataset,
    ForecastTable,
    SettlementTable,
    align,
    cache_read,
    cache_write,
    parse_dispatch,
    parse_predispatch,
    resample_to_30min,
)
from .optimizer import DispatchPlan, HorizonInstance, OptimizerParams, run_milp_backtest, solve_horizon
from .results import BacktestResult

__version__ = "0.1.0"
