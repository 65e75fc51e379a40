"""Small dataset builders shared by the tests."""

import numpy as np

from bessarb.market_data import ForecastTable, SettlementTable, align

HALF = np.timedelta64(30, "m")


def times_from(start, n):
    return np.datetime64(start, "m") + np.arange(1, n + 1) * HALF


def settlements(prices, start="2024-01-01T00:00", region="NSW1"):
    """Half-hourly actual prices; the first period ends at ``start + 30min``."""
    prices = np.asarray(prices, dtype=float)
    return SettlementTable(region, times_from(start, len(prices)), prices)


def perfect_forecasts(table, horizon=48, predicted=None):
    """Forecasts published every half hour for the next ``horizon`` periods.

    ``predicted`` overrides the forecast values (defaults to the actuals).
    """
    values = table.prices if predicted is None else np.asarray(predicted, dtype=float)
    st, mt, p = [], [], []
    for j, t in enumerate(table.times):
        for k in range(1, horizon + 1):
            st.append(t)
            mt.append(t - k * HALF)
            p.append(values[j])
    return ForecastTable(table.region, np.array(st), np.array(mt), np.array(p))


def dataset(prices, predicted=None, start="2024-01-01T00:00", horizon=48):
    table = settlements(prices, start)
    return align(table, perfect_forecasts(table, horizon, predicted))


def two_price_days(days, low=40.0, high=160.0, mid=100.0):
    """Each day: one ``low`` period at 02:00, one ``high`` at 18:00, else ``mid``."""
    day = np.full(48, mid)
    day[3] = low  # period ending 02:00
    day[35] = high  # period ending 18:00
    return np.tile(day, days)
