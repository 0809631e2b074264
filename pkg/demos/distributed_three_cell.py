"""Decentralized interference-temperature coordination on the three-cell layout.

Every AP starts from the power control that ignores interference and caps the
interference it causes at what that control actually generates.  Pairs of APs
then trade cap increments along a direction that lowers both of their MSEs,
exchanging only levels and sensitivities over the backhaul.
"""
import numpy as np

from aircomp import BaselineKind, draw_realization, init_it_from_allocation, run_algorithm2, run_baseline
from aircomp.network import three_cell_scenario

scenario = three_cell_scenario()
realization = draw_realization(scenario, seed=2024)
budgets = scenario.power_budgets

start = run_baseline(realization, BaselineKind.IGNORE_INTERFERENCE, budgets)
result = run_algorithm2(realization, init_it_from_allocation(realization, start.allocation.powers), budgets)

trace = result.trace_array()
print(f"stopped after {result.rounds} rounds: {result.stop_reason}")
print(f"{len(result.messages)} backhaul messages")
print("no cooperation :", np.round(start.mse, 4))
print("first iterate  :", np.round(trace[0], 4))
print("final          :", np.round(result.true_mse, 4))
print("final IT levels (row causes, column receives):")
print(result.it.levels)
