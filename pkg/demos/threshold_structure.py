"""Full power versus regularized channel inversion inside one cell.

Devices are sorted by their policy indicator.  Those below the denoising
threshold transmit at full budget; the rest invert their channel, softened by
the interference they would leak into a neighbour whose cap is binding.
"""
import numpy as np

from aircomp import CellProblem, solve_cell, verify_threshold_structure

rng = np.random.default_rng(7)
h = rng.uniform(0.2, 2.0, 8)
leak = rng.uniform(0.0, 0.6, (8, 1)) ** 2
budgets = np.ones(8)
problem = CellProblem(h=h, leak=leak, budgets=budgets, noise=0.05, incoming=0.02, caps=0.1 * budgets @ leak)

sol = solve_cell(problem, tol=1e-10)
order = np.argsort(sol.indicators, kind="stable")
print(f"threshold eta = {sol.eta:.4f}, multiplier = {sol.lam[0]:.4f}, full-power devices = {sol.k_star}")
print("device  indicator   power")
for k in order:
    print(f"{k:6d}  {sol.indicators[k]:9.4f}  {sol.powers[k]:6.4f}")
print("leaked interference", sol.outgoing_interference, "cap", problem.caps)
print(verify_threshold_structure(sol))
