"""Trace the MSE Pareto boundary of one two-cell realization and place the benchmarks on it.

Each MSE profile fixes a direction in the (cell 1, cell 2) MSE plane; the
centralized solver pushes along that ray until the SOC system turns infeasible.
The benchmark schemes land inside the region, above the boundary.
"""
from aircomp import BaselineKind, MseProfile, draw_realization, pareto_sweep, run_baseline, solve_p1, two_cell_profiles
from aircomp.network import two_cell_scenario

scenario = two_cell_scenario()
realization = draw_realization(scenario, seed=2024)
budgets = scenario.power_budgets

print("beta_1  beta_2   mse_1    mse_2    sum")
for point in pareto_sweep(realization, two_cell_profiles(9), budgets):
    print(f"{point.beta[0]:.2f}    {point.beta[1]:.2f}   {point.mse[0]:7.4f}  {point.mse[1]:7.4f}  {point.eps:7.4f}")

print("\nbenchmarks (sum MSE) and the boundary point along the same profile:")
for kind in BaselineKind:
    base = run_baseline(realization, kind, budgets)
    best = solve_p1(realization, MseProfile.from_mse(base.mse), budgets)
    print(f"  {kind.value:20s} {base.sum_mse:8.4f}   boundary {best.mse.sum():8.4f}")
