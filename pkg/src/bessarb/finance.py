"""Investment metrics for a flat annual cash flow."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class CashModel:
    capex: float = 8_000_000.0
    opex_annual: float = 20_000.0
    lifetime_years: int = 20
    discount_rate: float = 0.055

    def __post_init__(self):
        if self.capex <= 0 or self.opex_annual < 0 or self.lifetime_years <= 0:
            raise ValueError("capex and lifetime must be positive and opex non-negative")
        if not 0 <= self.discount_rate < 1:
            raise ValueError("discount_rate must lie in [0, 1)")


class UndefinedIRR(ValueError):
    """No discount rate in the search bracket sets the NPV to zero."""


@dataclass(frozen=True)
class FinanceReport:
    strategy: str
    annual_revenue: float
    annual_cashflow: float
    payback_years: float | None
    npv: float
    irr: float | None
    discount_rate: float

    @property
    def recoverable(self) -> bool:
        return self.payback_years is not None


def annual_cashflow(annual_revenue: float, model: CashModel = CashModel()) -> float:
    return annual_revenue - model.opex_annual


def npv(model: CashModel, cashflow: float, rate: float | None = None) -> float:
    """``-capex`` plus ``cashflow`` received at the end of each year of life."""
    r = model.discount_rate if rate is None else rate
    if r == 0:
        return -model.capex + cashflow * model.lifetime_years
    return -model.capex + math.fsum(cashflow / (1 + r) ** t for t in range(1, model.lifetime_years + 1))


def irr(model: CashModel, cashflow: float, lo: float = -0.99, hi: float = 10.0, tol: float = 0.01, max_iter: int = 200) -> float:
    """Discount rate with zero NPV, by bisection on ``[lo, hi]``."""
    if cashflow <= 0:
        raise UndefinedIRR("IRR is undefined for a non-positive cash flow")
    f_lo, f_hi = npv(model, cashflow, lo), npv(model, cashflow, hi)
    if f_lo == 0:
        return lo
    if f_hi == 0:
        return hi
    if (f_lo > 0) == (f_hi > 0):
        raise UndefinedIRR(f"NPV does not change sign on [{lo}, {hi}]")
    mid = (lo + hi) / 2
    for _ in range(max_iter):
        mid = (lo + hi) / 2
        f_mid = npv(model, cashflow, mid)
        if abs(f_mid) < tol:
            break
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return mid


def payback(model: CashModel, cashflow: float) -> float | None:
    """Simple payback in years; ``None`` when the capex is never recovered."""
    if cashflow <= 0:
        return None
    return model.capex / cashflow


def report(strategy: str, annual_revenue: float | None = None, model: CashModel = CashModel(), cashflow: float | None = None) -> FinanceReport:
    """Full metrics from an annual revenue (or directly from a cash flow)."""
    if cashflow is None:
        if annual_revenue is None:
            raise ValueError("give annual_revenue or cashflow")
        cashflow = annual_cashflow(annual_revenue, model)
    elif annual_revenue is None:
        annual_revenue = cashflow + model.opex_annual
    try:
        rate = irr(model, cashflow)
    except UndefinedIRR:
        rate = None
    return FinanceReport(strategy, annual_revenue, cashflow, payback(model, cashflow), npv(model, cashflow), rate, model.discount_rate)


COLUMNS = ["strategy", "annual_revenue", "annual_cashflow", "payback_years", "npv", "irr", "discount_rate"]


def write_reports(reports, json_path=None, csv_path=None) -> None:
    rows = [asdict(r) for r in reports]
    if json_path is not None:
        with open(json_path, "w") as fh:
            json.dump(rows, fh, indent=2, sort_keys=True)
            fh.write("\n")
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, COLUMNS, lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow({k: ("non-recoverable" if row[k] is None and k == "payback_years" else row[k]) for k in COLUMNS})
