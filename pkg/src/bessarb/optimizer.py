"""Rolling-horizon dispatch: the per-period mixed-integer program and backtest.

Each decision period the battery plans charge/discharge/hold over the next
24 hours of weighted forecast prices, maximising

    sum_i P_i * (discharged_i - charged_i)

subject to state-of-charge bounds, power limits, price thresholds (charge
only if P_i <= theta_charge, discharge only if P_i >= theta_discharge), one
action per period and a per-calendar-day action budget. Only the first
period of the plan is executed.

Solver
------
Once the binary pattern (which periods charge, discharge or hold) is fixed,
the remaining LP has difference constraints only, so an optimal vertex has
every state of charge at ``a + k*E`` with ``a`` in ``{soc0, 0, C}``, ``E``
the per-period energy limit and ``k`` an integer. A dynamic programme over
that finite lattice and the daily action counter therefore solves the MILP
exactly.
"""

from __future__ import annotations

import csv
import datetime as dt
import logging
from dataclasses import dataclass, field

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
from .market_data import HALF_HOUR, AlignedDataset
from .results import BacktestResult, count_days
from .weighting import ForecastSource

logger = logging.getLogger(__name__)

HOLD = "hold"
_TOL = 1e-9
_NEG = -np.inf


@dataclass(frozen=True)
class OptimizerParams:
    theta_charge: float = 50.0
    theta_discharge: float = 150.0
    lookahead_hours: float = 24.0
    daily_action_max: int = 6
    override_revenue: float = 1000.0

    def __post_init__(self):
        if abs(self.lookahead_hours * 2 - round(self.lookahead_hours * 2)) > 1e-9 or self.lookahead_hours <= 0:
            raise ValueError("lookahead_hours must be a positive multiple of 0.5")
        if self.override_revenue < 0:
            raise ValueError("override_revenue must be non-negative")
        if self.daily_action_max < 0:
            raise ValueError("daily_action_max must be non-negative")


@dataclass
class HorizonInstance:
    """One planning problem.

    ``times`` and ``prices`` are the forecast periods in strictly increasing
    time order. ``allowances`` maps a date to the number of actions still
    available that day; dates not listed get the full daily budget.
    """

    times: list
    prices: np.ndarray
    soc0: float
    capacity_max: float
    power_max: float = 10.0
    period_hours: float = 0.5
    allowances: dict = field(default_factory=dict)

    def __post_init__(self):
        self.prices = np.asarray(self.prices, dtype=np.float64)
        self.times = [_as_datetime(t) for t in self.times]
        if len(self.times) != len(self.prices):
            raise ValueError("times and prices differ in length")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("horizon times must be strictly increasing")
        if not 0.0 <= self.soc0 <= self.capacity_max:
            raise ValueError(f"soc0 {self.soc0} outside [0, {self.capacity_max}]")

    @property
    def energy_limit(self) -> float:
        return self.power_max * self.period_hours

    def allowance(self, day, default: int) -> int:
        return self.allowances.get(day, default)

    @classmethod
    def from_lookahead(cls, lookahead, soc0, capacity_max, power_max=10.0, period_hours=0.5, allowances=None):
        return cls(lookahead.times, lookahead.prices, soc0, capacity_max, power_max, period_hours, allowances or {})


@dataclass(frozen=True)
class PlanStep:
    settlement_time: dt.datetime
    decision: str
    charge_energy: float
    discharge_energy: float
    expected_price: float

    @property
    def energy(self) -> float:
        return self.charge_energy or self.discharge_energy

    @property
    def expected_revenue(self) -> float:
        return self.expected_price * (self.discharge_energy - self.charge_energy)


@dataclass
class DispatchPlan:
    steps: list
    objective_value: float

    @property
    def first(self) -> PlanStep | None:
        return self.steps[0] if self.steps else None

    @property
    def actions(self) -> int:
        return sum(s.decision != HOLD for s in self.steps)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["period", "decision", "energy", "expected_price"])
            for s in self.steps:
                writer.writerow([s.settlement_time.isoformat(), s.decision, repr(s.energy), repr(s.expected_price)])


def _as_datetime(t) -> dt.datetime:
    if isinstance(t, dt.datetime):
        return t
    return np.datetime64(t, "m").astype(dt.datetime)


def soc_lattice(soc0: float, capacity: float, step: float) -> np.ndarray:
    """Candidate states of charge ``{soc0, 0, capacity} +/- k*step`` in range.

    ``soc0``, ``0`` and ``capacity`` are kept bit-exact; other points within
    1e-9 of an existing one are merged into it.
    """
    points = [soc0, 0.0, capacity]
    k_max = int(np.floor(capacity / step + _TOL)) + 1
    for anchor in (soc0, 0.0, capacity):
        for k in range(-k_max, k_max + 1):
            value = anchor + k * step
            if -_TOL <= value <= capacity + _TOL:
                points.append(min(max(value, 0.0), capacity))
    points.sort()
    out = []
    for p in points:
        if out and p - out[-1] <= _TOL:
            if p in (soc0, 0.0, capacity):
                out[-1] = p
            continue
        out.append(p)
    return np.array(out)


def solve_horizon(instance: HorizonInstance, params: OptimizerParams = OptimizerParams()) -> DispatchPlan:
    """Optimal charge/discharge/hold plan over the instance horizon.

    Ties are broken towards fewer actions, then hold over discharge over
    charge in each period.
    """
    n = len(instance.prices)
    days = [t.date() for t in instance.times]
    allow = [instance.allowance(d, params.daily_action_max) for d in days]
    if any(a < 0 for a in allow):
        raise ValueError("negative remaining allowance in horizon")
    if n == 0:
        return DispatchPlan([], 0.0)

    lattice = soc_lattice(instance.soc0, instance.capacity_max, instance.energy_limit)
    m = len(lattice)
    start = int(np.flatnonzero(lattice == instance.soc0)[0])
    # moved[s, t]: energy discharged going from lattice[s] to lattice[t]
    moved = lattice[:, None] - lattice[None, :]
    limit = instance.energy_limit + _TOL
    can_discharge = (moved > _TOL) & (moved <= limit)
    can_charge = (moved < -_TOL) & (moved >= -limit)
    width = max(allow) + 2

    value = np.zeros((m, width))
    count = np.zeros((m, width), dtype=np.int64)
    choice = np.zeros((n, m, width), dtype=np.int8)  # 0 hold, 1 charge, 2 discharge
    target = np.tile(np.arange(m)[:, None], (n, 1, width)).reshape(n, m, width)

    for i in range(n - 1, -1, -1):
        if i == n - 1 or days[i + 1] != days[i]:
            nxt_v = np.repeat(value[:, :1], width, axis=1)
            nxt_c = np.repeat(count[:, :1], width, axis=1)
        else:
            nxt_v, nxt_c = value, count
        price = instance.prices[i]
        ok_c = price <= params.theta_charge
        ok_d = price >= params.theta_discharge
        new_v = nxt_v.copy()
        new_c = nxt_c.copy()
        budget = allow[i]
        if (ok_c or ok_d) and budget > 0:
            # candidates over target states for k = 0 .. budget-1 -> k+1
            after_v = nxt_v[:, 1 : budget + 1]  # (t, k)
            after_c = nxt_c[:, 1 : budget + 1]
            for code, ok, mask in ((2, ok_d, can_discharge), (1, ok_c, can_charge)):
                if not ok:
                    continue
                gain = np.where(mask, price * moved, _NEG)
                cand = gain[:, :, None] + after_v[None, :, :]  # (s, t, k)
                best = cand.max(axis=1)
                tie = cand >= best[:, None, :] - _TOL * (1.0 + np.abs(best[:, None, :]))
                cnt = np.where(tie, after_c[None, :, :] + 1, np.iinfo(np.int64).max)
                pick = cnt.argmin(axis=1)
                pick_c = np.take_along_axis(cnt, pick[:, None, :], axis=1)[:, 0, :]
                pick_v = np.take_along_axis(cand, pick[:, None, :], axis=1)[:, 0, :]
                cur_v = new_v[:, :budget]
                cur_c = new_c[:, :budget]
                better = pick_v > cur_v + _TOL * (1.0 + np.abs(cur_v))
                same = ~better & (pick_v >= cur_v - _TOL * (1.0 + np.abs(cur_v)))
                better |= same & (pick_c < cur_c)
                better &= np.isfinite(pick_v)
                new_v[:, :budget] = np.where(better, pick_v, cur_v)
                new_c[:, :budget] = np.where(better, pick_c, cur_c)
                choice[i, :, :budget] = np.where(better, code, choice[i, :, :budget])
                target[i, :, :budget] = np.where(better, pick, target[i, :, :budget])
        value, count = new_v, new_c

    steps = []
    s, k = start, 0
    objective = 0.0
    for i in range(n):
        if i > 0 and days[i] != days[i - 1]:
            k = 0
        code = int(choice[i, s, k])
        t = int(target[i, s, k])
        price = float(instance.prices[i])
        if code == 0:
            steps.append(PlanStep(instance.times[i], HOLD, 0.0, 0.0, price))
        else:
            energy = abs(float(lattice[t] - lattice[s]))
            if code == 1:
                steps.append(PlanStep(instance.times[i], CHARGE, energy, 0.0, price))
            else:
                steps.append(PlanStep(instance.times[i], DISCHARGE, 0.0, energy, price))
            objective += price * float(lattice[s] - lattice[t])
            s, k = t, k + 1
    return DispatchPlan(steps, objective)


# ------------------------------------------------------------ backtest


def run_milp_backtest(
    dataset: AlignedDataset,
    config: BatteryConfig = BatteryConfig(),
    params: OptimizerParams = OptimizerParams(),
    source: ForecastSource | None = None,
    plan_hook=None,
) -> BacktestResult:
    """Roll the optimiser through every settlement period.

    Before period ``T`` the plan is built from forecasts published by
    ``T - 30min``. The first planned action is submitted as a bid at the
    threshold price and clears against the actual price; trades use actual
    prices only. Once the day's budget is spent an action still goes ahead
    when its expected revenue reaches ``params.override_revenue``.

    ``plan_hook(now, lookahead, plan)`` is called after every solve.
    """
    source = source or ForecastSource.from_dataset(dataset)
    state = new_state(config)
    ledger = TradeLedger()
    times = dataset.settlements.times
    cumulative = np.empty(len(times))
    energy_cap = config.energy_per_period
    stats = dict(solves=0, unplannable=0, overrides=0, rejected_bids=0, planned_actions=0)

    for j, (when, actual) in enumerate(zip(times.tolist(), dataset.settlements.prices.tolist())):
        roll_date(state, when.date())
        now = np.datetime64(when, "m") - HALF_HOUR
        look = source.lookahead(now, params.lookahead_hours)
        first = look.forecasts[0] if look.forecasts else None
        if first is None or first.settlement_time != np.datetime64(when, "m"):
            stats["unplannable"] += 1
            cumulative[j] = ledger.total_revenue
            continue

        p1 = first.price
        tradable = p1 <= params.theta_charge or p1 >= params.theta_discharge
        over_limit = state.actions_today >= params.daily_action_max
        if over_limit:
            # only an action that can reach the override revenue is worth planning
            best_case = max(p1 * energy_cap if p1 >= params.theta_discharge else -np.inf,
                            -p1 * energy_cap if p1 <= params.theta_charge else -np.inf)
            tradable = tradable and best_case >= params.override_revenue
        if not tradable:
            cumulative[j] = ledger.total_revenue
            continue

        today = when.date()
        remaining = 1 if over_limit else params.daily_action_max - state.actions_today
        instance = HorizonInstance.from_lookahead(
            look, state.soc, state.capacity_max, config.power_max, config.period_hours, {today: remaining}
        )
        plan = solve_horizon(instance, params)
        stats["solves"] += 1
        if plan_hook is not None:
            plan_hook(now, look, plan)
        step = plan.first
        if step.decision == HOLD:
            cumulative[j] = ledger.total_revenue
            continue
        stats["planned_actions"] += 1
        expected = step.expected_revenue
        if over_limit and expected < params.override_revenue:
            cumulative[j] = ledger.total_revenue
            continue
        if step.decision == CHARGE:
            done = execute_charge(state, actual, params.theta_charge, ledger, when, step.charge_energy, expected, over_limit)
        else:
            done = execute_discharge(state, actual, params.theta_discharge, ledger, when, step.discharge_energy, expected, over_limit)
        if done:
            stats["overrides"] += int(over_limit)
        else:
            stats["rejected_bids"] += 1
        cumulative[j] = ledger.total_revenue

    stats["lookahead_violations"] = source.audit_violations
    return BacktestResult(
        f"milp-{source.name}",
        ledger,
        times,
        cumulative,
        count_days(times),
        {
            **stats,
            "theta_charge": params.theta_charge,
            "theta_discharge": params.theta_discharge,
            "daily_action_max": params.daily_action_max,
            "lookahead_hours": params.lookahead_hours,
            "override_revenue": params.override_revenue,
            "final_capacity": state.capacity_max,
            "final_soc": state.soc,
        },
    )
