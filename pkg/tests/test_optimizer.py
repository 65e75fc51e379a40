import datetime as dt

import numpy as np
import pytest
from scipy.optimize import Bounds, LinearConstraint, milp

from bessarb.battery import CHARGE, DISCHARGE, BatteryConfig
from bessarb.market_data import ForecastTable, align
from bessarb.optimizer import HOLD, DispatchPlan, HorizonInstance, OptimizerParams, run_milp_backtest, soc_lattice, solve_horizon
from bessarb.oracle import oracle_dp, validate_plan

from helpers import dataset, settlements

P = OptimizerParams()
T0 = dt.datetime(2024, 1, 1, 0, 30)


def instance(prices, soc0, capacity=20.0, start=T0, allowances=None):
    times = [start + dt.timedelta(minutes=30 * i) for i in range(len(prices))]
    return HorizonInstance(times, prices, soc0, capacity, allowances=allowances or {})


def random_instance(rng, n=None, grid=None):
    n = n or int(rng.integers(4, 17))
    start = dt.datetime(2024, 1, 1) + dt.timedelta(minutes=30 * int(rng.integers(0, 96)))
    capacity = 20.0 if grid else float(rng.uniform(6, 20))
    soc0 = float(rng.integers(0, round(capacity / grid) + 1) * grid) if grid else float(rng.uniform(0, capacity))
    inst = instance(rng.uniform(-50, 300, n), soc0, capacity, start)
    days = sorted({t.date() for t in inst.times})
    inst.allowances = {days[0]: int(rng.integers(0, 7))}
    return inst


def highs_objective(inst, params):
    """Solve the same MILP with HiGHS (continuous energies plus two binaries per period)."""
    n, p, e, cap = len(inst.prices), inst.prices, inst.energy_limit, inst.capacity_max
    nv = 4 * n  # c, d, charge flag, discharge flag
    cost = np.zeros(nv)
    cost[:n], cost[n : 2 * n] = p, -p
    rows, lo, hi = [], [], []
    cum = np.tril(np.ones((n, n)))
    soc_rows = np.zeros((n, nv))
    soc_rows[:, :n], soc_rows[:, n : 2 * n] = cum, -cum
    rows.append(soc_rows)
    lo += [-inst.soc0] * n
    hi += [cap - inst.soc0] * n
    for i in range(n):
        for var, flag, ok in ((i, 2 * n + i, p[i] <= params.theta_charge), (n + i, 3 * n + i, p[i] >= params.theta_discharge)):
            r = np.zeros(nv)
            r[var], r[flag] = 1.0, -e * ok
            rows.append(r[None])
            lo.append(-np.inf)
            hi.append(0.0)
        r = np.zeros(nv)
        r[2 * n + i] = r[3 * n + i] = 1.0
        rows.append(r[None])
        lo.append(-np.inf)
        hi.append(1.0)
    for day in sorted({t.date() for t in inst.times}):
        r = np.zeros(nv)
        for i, t in enumerate(inst.times):
            if t.date() == day:
                r[2 * n + i] = r[3 * n + i] = 1.0
        rows.append(r[None])
        lo.append(-np.inf)
        hi.append(inst.allowance(day, params.daily_action_max))
    res = milp(
        cost,
        constraints=LinearConstraint(np.vstack(rows), lo, hi),
        integrality=np.r_[np.zeros(2 * n), np.ones(2 * n)],
        bounds=Bounds(np.zeros(nv), np.r_[np.full(2 * n, e), np.ones(2 * n)]),
        options={"mip_rel_gap": 0.0},
    )
    assert res.success, res.message
    return -res.fun


# ------------------------------------------------------------ examples


def test_three_period_example():
    plan = solve_horizon(instance([40.0, 60.0, 160.0], 0.0))
    assert [s.decision for s in plan.steps] == [CHARGE, HOLD, DISCHARGE]
    assert plan.steps[0].charge_energy == 5.0 and plan.steps[2].discharge_energy == 5.0
    assert plan.objective_value == 600.0
    assert validate_plan(instance([40.0, 60.0, 160.0], 0.0), P, plan) == []


def test_dead_band_holds():
    plan = solve_horizon(instance([60.0, 100.0, 149.0], 10.0))
    assert plan.actions == 0 and plan.objective_value == 0.0


@pytest.mark.parametrize("soc0", [5.0, 10.0])
def test_single_allowance_takes_best_action(soc0):
    inst = instance([40.0, 160.0], soc0, allowances={T0.date(): 1})
    plan = solve_horizon(inst)
    assert [s.decision for s in plan.steps] == [HOLD, DISCHARGE]
    assert plan.objective_value == 800.0


def test_negative_allowance_rejected():
    with pytest.raises(ValueError):
        solve_horizon(instance([40.0], 5.0, allowances={T0.date(): -1}))


def test_empty_horizon():
    plan = solve_horizon(instance([], 5.0))
    assert plan.steps == [] and plan.first is None


def test_instance_validation():
    with pytest.raises(ValueError):
        instance([1.0], 25.0)
    with pytest.raises(ValueError):
        HorizonInstance([T0, T0], [1.0, 2.0], 0.0, 20.0)
    with pytest.raises(ValueError):
        OptimizerParams(lookahead_hours=0.7)


def test_tie_prefers_fewer_actions():
    # discharging early or late earns the same; one action either way, never two half actions
    plan = solve_horizon(instance([200.0, 200.0], 5.0))
    assert plan.actions == 1 and plan.objective_value == 1000.0
    assert plan.steps[0].decision == HOLD or plan.steps[1].decision == HOLD


def test_allowance_resets_across_midnight():
    start = dt.datetime(2024, 1, 1, 23, 30)
    inst = instance([200.0, 200.0, 200.0], 15.0, start=start, allowances={start.date(): 1})
    plan = solve_horizon(inst, OptimizerParams(daily_action_max=2))
    assert plan.actions == 3 and plan.objective_value == 3000.0
    assert validate_plan(inst, OptimizerParams(daily_action_max=2), plan) == []


def test_lattice_contains_anchors():
    lat = soc_lattice(3.3, 20.0, 5.0)
    for v in (0.0, 3.3, 20.0, 8.3, 15.0, 5.0):
        assert np.any(np.isclose(lat, v))
    assert np.all(np.diff(lat) > 0)


def test_plan_csv(tmp_path):
    plan = solve_horizon(instance([40.0, 60.0, 160.0], 0.0))
    plan.to_csv(tmp_path / "p.csv")
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "period,decision,energy,expected_price"
    assert lines[1] == "2024-01-01T00:30:00,charge,5.0,40.0"


# ---------------------------------------------------------------- oracle


def test_oracle_examples():
    assert oracle_dp(instance([40.0, 60.0, 160.0], 0.0), P, 0.5) == 600.0
    assert oracle_dp(instance([60.0, 100.0], 10.0), P, 0.5) == 0.0
    with pytest.raises(ValueError):
        oracle_dp(instance([40.0] * 21, 0.0), P, 0.5)
    with pytest.raises(ValueError):
        oracle_dp(instance([40.0], 0.0), P, 25.0)


def test_oracle_refinement_is_monotone():
    rng = np.random.default_rng(11)
    for _ in range(25):
        inst = random_instance(rng, n=8)
        assert oracle_dp(inst, P, 0.05) >= oracle_dp(inst, P, 0.5) - 1e-9


def test_validator_catches_broken_plans():
    inst = instance([40.0, 60.0, 160.0], 0.0)
    plan = solve_horizon(inst)
    bad = DispatchPlan(list(plan.steps), plan.objective_value)
    bad.steps[2] = bad.steps[2].__class__(bad.steps[2].settlement_time, DISCHARGE, 0.0, 6.0, 160.0)
    problems = validate_plan(inst, P, bad)
    assert any("power limit" in p for p in problems) and any("soc" in p for p in problems)
    bad = DispatchPlan(list(plan.steps), plan.objective_value)
    bad.steps[1] = bad.steps[1].__class__(bad.steps[1].settlement_time, CHARGE, 5.0, 0.0, 60.0)
    assert any("above threshold" in p for p in validate_plan(inst, P, bad))
    tight = instance([40.0, 60.0, 160.0], 0.0, allowances={T0.date(): 1})
    assert any("allowance" in p for p in validate_plan(tight, P, plan))


# -------------------------------------------------------- cross-checks


def test_matches_highs_off_grid():
    rng = np.random.default_rng(2024)
    for _ in range(60):
        inst = random_instance(rng)
        ours = solve_horizon(inst).objective_value
        ref = highs_objective(inst, P)
        assert ours == pytest.approx(ref, rel=1e-7, abs=1e-6)


def test_matches_oracle_on_grid():
    rng = np.random.default_rng(7)
    for _ in range(40):
        inst = random_instance(rng, grid=0.05)
        plan = solve_horizon(inst)
        assert validate_plan(inst, P, plan) == []
        fine = oracle_dp(inst, P, 0.05)
        assert plan.objective_value >= oracle_dp(inst, P, 0.5) - 1e-9
        assert abs(plan.objective_value - fine) <= 1e-6 * max(1.0, abs(fine))


# --------------------------------------------------------------- backtest


def test_no_forecasts_no_actions():
    s = settlements([40.0, 160.0] * 10)
    ds = align(s, ForecastTable("NSW1", [], [], []))
    r = run_milp_backtest(ds)
    assert r.actions_total == 0 and r.info["unplannable"] == len(s)


def test_perfect_forecast_day_realises_plan():
    ds = dataset([40.0, 60.0, 160.0], horizon=3)
    plans = []
    r = run_milp_backtest(ds, BatteryConfig(soc_init_fraction=0.0), plan_hook=lambda now, look, plan: plans.append(plan))
    assert r.total_revenue == 600.0
    assert plans[0].objective_value == 600.0
    assert [e.action for e in r.ledger.entries] == [CHARGE, DISCHARGE]
    for e in r.ledger.entries:
        assert e.cash_delta == e.expected_revenue


def test_rejected_bid_when_actual_misses_offer():
    ds = dataset([140.0], predicted=[160.0], horizon=2)
    r = run_milp_backtest(ds)
    assert r.actions_total == 0 and r.total_revenue == 0.0
    assert r.info["rejected_bids"] == 1


def override_day():
    prices = np.full(48, 100.0)
    prices[2:16:2] = 40.0
    prices[3:17:2] = 200.0
    prices[40] = 17480.0
    return prices


def test_override_executes_large_trades_only():
    # forecasts only 2 h ahead, so the spike is unseen while the budget is spent
    ds = dataset(override_day(), horizon=4)
    r = run_milp_backtest(ds, BatteryConfig(soc_init_fraction=1.0), OptimizerParams(daily_action_max=2))
    overrides = [e for e in r.ledger.entries if e.override]
    assert r.info["overrides"] == len(overrides) >= 1
    assert all(e.expected_revenue >= 1000.0 for e in overrides)
    assert any(e.price == 17480.0 for e in overrides)
    normal = [e for e in r.ledger.entries if not e.override]
    assert len(normal) == 2


def test_override_disabled_by_high_threshold():
    ds = dataset(override_day(), horizon=4)
    r = run_milp_backtest(ds, BatteryConfig(soc_init_fraction=1.0), OptimizerParams(daily_action_max=2, override_revenue=1e9))
    assert r.info["overrides"] == 0 and r.actions_total == 2


def test_backtest_respects_thresholds_and_conservation():
    rng = np.random.default_rng(5)
    prices = rng.uniform(-20, 260, 96 * 2)
    ds = dataset(prices, predicted=prices + rng.normal(0, 20, len(prices)), horizon=24)
    r = run_milp_backtest(ds)
    for e in r.ledger.entries:
        assert e.price <= 50.0 if e.action == CHARGE else e.price >= 150.0
        assert e.energy <= 5.0
    assert r.ledger.resummed() == pytest.approx(r.total_revenue, rel=1e-9)
    assert r.info["lookahead_violations"] == 0
    assert r.strategy == "milp-raw"
