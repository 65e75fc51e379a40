"""Independent checks for dispatch plans.

``oracle_dp`` solves the planning problem by brute force over a uniform
energy grid and shares no code with the lattice solver. ``validate_plan``
re-derives feasibility of a returned plan from first principles.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .battery import CHARGE, DISCHARGE
from .optimizer import HOLD, DispatchPlan, HorizonInstance, OptimizerParams


def oracle_dp(instance: HorizonInstance, params: OptimizerParams, soc_grid: float) -> float:
    """Best objective using only energy moves that are multiples of ``soc_grid``.

    States are ``soc0 + j*soc_grid`` inside ``[0, capacity]``. The result is
    a lower bound on the true optimum and equals it whenever ``soc0`` and
    the capacity lie on the grid and the energy limit is a grid multiple.
    """
    n = len(instance.prices)
    if n > 20:
        raise ValueError("oracle is meant for horizons of at most 20 periods")
    if not soc_grid > 0 or soc_grid > instance.capacity_max:
        raise ValueError(f"grid {soc_grid} unusable for capacity {instance.capacity_max}")
    g = soc_grid
    below = int(np.floor(instance.soc0 / g + 1e-9))
    above = int(np.floor((instance.capacity_max - instance.soc0) / g + 1e-9))
    levels = instance.soc0 + g * np.arange(-below, above + 1)
    origin = below
    reach = int(np.floor(instance.energy_limit / g + 1e-9))
    days = [t.date() for t in instance.times]
    allow = [instance.allowance(d, params.daily_action_max) for d in days]
    depth = max(allow, default=0) + 1

    # best[k, j]: best profit so far at level j with k actions used today
    best = np.full((depth, len(levels)), -np.inf)
    best[0, origin] = 0.0
    for i in range(n):
        if i > 0 and days[i] != days[i - 1]:
            merged = best.max(axis=0)
            best = np.full_like(best, -np.inf)
            best[0] = merged
        p = float(instance.prices[i])
        nxt = best.copy()
        if reach > 0:
            for k in range(min(allow[i], depth - 1)):
                shifted = best[k] + p * levels  # profit of leaving level j, less p*level of arrival
                pad = np.full(reach, -np.inf)
                if p <= params.theta_charge:
                    # arrive at j from j-reach .. j-1
                    win = sliding_window_view(np.concatenate([pad, shifted]), reach)[: len(levels)]
                    nxt[k + 1] = np.maximum(nxt[k + 1], win.max(axis=1) - p * levels)
                if p >= params.theta_discharge:
                    # arrive at j from j+1 .. j+reach
                    win = sliding_window_view(np.concatenate([shifted, pad]), reach)[1 : len(levels) + 1]
                    nxt[k + 1] = np.maximum(nxt[k + 1], win.max(axis=1) - p * levels)
        best = nxt
    return float(best.max())


def validate_plan(
    instance: HorizonInstance, params: OptimizerParams, plan: DispatchPlan, tol: float = 1e-7
) -> list[str]:
    """List every constraint the plan breaks (empty when feasible)."""
    problems = []
    if len(plan.steps) != len(instance.prices):
        return [f"plan has {len(plan.steps)} steps for {len(instance.prices)} periods"]
    limit = instance.energy_limit
    soc = instance.soc0
    used = {}
    objective = 0.0
    for i, step in enumerate(plan.steps):
        p = float(instance.prices[i])
        c, d = step.charge_energy, step.discharge_energy
        if step.settlement_time != instance.times[i]:
            problems.append(f"step {i}: time {step.settlement_time} != {instance.times[i]}")
        if c < -tol or d < -tol:
            problems.append(f"step {i}: negative energy")
        if c > tol and d > tol:
            problems.append(f"step {i}: charges and discharges together")
        if step.decision == HOLD and (c > tol or d > tol):
            problems.append(f"step {i}: hold moves energy")
        if step.decision == CHARGE and not c > tol:
            problems.append(f"step {i}: charge without energy")
        if step.decision == DISCHARGE and not d > tol:
            problems.append(f"step {i}: discharge without energy")
        if step.decision not in (HOLD, CHARGE, DISCHARGE):
            problems.append(f"step {i}: unknown decision {step.decision!r}")
        if c > limit + tol or d > limit + tol:
            problems.append(f"step {i}: energy above power limit")
        if c > tol and not p <= params.theta_charge:
            problems.append(f"step {i}: charge at forecast {p} above threshold")
        if d > tol and not p >= params.theta_discharge:
            problems.append(f"step {i}: discharge at forecast {p} below threshold")
        if abs(step.expected_price - p) > tol:
            problems.append(f"step {i}: expected price differs from forecast")
        soc += c - d
        if soc < -tol or soc > instance.capacity_max + tol:
            problems.append(f"step {i}: soc {soc} outside [0, {instance.capacity_max}]")
        if step.decision != HOLD:
            day = instance.times[i].date()
            used[day] = used.get(day, 0) + 1
        objective += p * (d - c)
    for day, n in used.items():
        if n > instance.allowance(day, params.daily_action_max):
            problems.append(f"{day}: {n} actions exceed allowance")
    if abs(objective - plan.objective_value) > tol * (1 + abs(objective)):
        problems.append(f"objective {plan.objective_value} != recomputed {objective}")
    return problems
