"""Investment verdicts for three levels of annual arbitrage revenue.

Run with ``python demos/finance.py``.
"""

from bessarb import finance
from bessarb.finance import CashModel

model = CashModel(capex=8_000_000, opex_annual=20_000, lifetime_years=20, discount_rate=0.055)

for name, revenue in [("threshold", 450_000), ("forecast-aware", 750_000), ("ml-corrected", 1_000_000)]:
    r = finance.report(name, revenue, model)
    irr = "undefined" if r.irr is None else f"{100 * r.irr:.1f}%"
    print(f"{name:>15}: cash {r.annual_cashflow:>9,.0f}/y  NPV {r.npv / 1e6:+.2f}M  payback {r.payback_years:.1f} y  IRR {irr}")

breakeven = finance.annual_cashflow(20_000 + model.capex / model.lifetime_years, model)
print(f"\nundiscounted break-even cash flow: {breakeven:,.0f}/y (IRR {finance.irr(model, breakeven):.4f})")
