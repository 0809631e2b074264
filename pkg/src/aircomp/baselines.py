"""Benchmark power-control schemes and brute-force grid oracles for tiny instances."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .celldual import CellProblem, ItLevels, solve_cell
from .centralized import MseProfile
from .mse import Allocation, mse_of_cell, optimal_denoise
from .network import ChannelRealization

GRID_POINT_LIMIT = 20_000_000


class BaselineKind(str, Enum):
    FULL_POWER = "full_power"
    IGNORE_INTERFERENCE = "ignore_interference"
    MAX_INTERFERENCE = "max_interference"


@dataclass(frozen=True)
class BaselineResult:
    kind: BaselineKind
    allocation: Allocation
    mse: np.ndarray

    @property
    def sum_mse(self) -> float:
        return float(self.mse.sum())


def run_baseline(realization: ChannelRealization, kind: BaselineKind | str, budgets,
                 true_interference_eta: bool = True) -> BaselineResult:
    """Allocate powers by ``kind`` and evaluate the MSE under the actual interference.

    With ``true_interference_eta`` (default) each AP re-optimizes its denoising
    factor against the interference it really receives; otherwise it keeps the
    factor designed for the interference the scheme assumed.
    """
    kind = BaselineKind(kind)
    budgets = np.asarray(budgets, dtype=float)
    num_cells = realization.num_cells
    h_abs = realization.h_abs
    powers = budgets.copy()
    assumed_eta = np.empty(num_cells)
    for ell in range(num_cells):
        idx = realization.devices(ell)
        if kind is BaselineKind.FULL_POWER:
            assumed_eta[ell] = optimal_denoise(realization, powers, ell)
            continue
        noise = realization.noise_power
        if kind is BaselineKind.MAX_INTERFERENCE:
            noise += realization.interference_power(budgets, ell)
        sol = solve_cell(CellProblem.isolated(h_abs[idx], budgets[idx], noise))
        powers[idx] = sol.powers
        assumed_eta[ell] = sol.eta
    if true_interference_eta:
        eta = np.array([optimal_denoise(realization, powers, ell) for ell in range(num_cells)])
    else:
        eta = assumed_eta
    allocation = Allocation(powers, eta)
    mse = np.array([mse_of_cell(realization, allocation, ell) for ell in range(num_cells)])
    return BaselineResult(kind, allocation, mse)


@dataclass(frozen=True)
class GridResult:
    value: float
    powers: np.ndarray
    grid_effect: float


def _grid_axes(budgets, resolution: int) -> list[np.ndarray]:
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    if resolution ** len(budgets) > GRID_POINT_LIMIT:
        raise ValueError(f"grid of {resolution}^{len(budgets)} points exceeds the oracle's budget")
    return [np.linspace(0.0, b, resolution) for b in budgets]


def _cell_mse_grid(h, powers, cross, noise):
    """Optimal-eta MSE on a grid; ``powers`` has devices on the last axis."""
    amplitude = (np.sqrt(powers) * h).sum(axis=-1)
    received = (powers * h**2).sum(axis=-1) + cross + noise
    return len(h) - amplitude**2 / received


def _neighbour_spread(values: np.ndarray, best: tuple) -> float:
    """Largest objective change between the best grid point and its axis neighbours."""
    spread = 0.0
    for axis in range(values.ndim):
        for step in (-1, 1):
            pos = list(best)
            pos[axis] += step
            if 0 <= pos[axis] < values.shape[axis] and np.isfinite(values[tuple(pos)]):
                spread = max(spread, abs(values[tuple(pos)] - values[best]))
    return float(spread)


def grid_search_p1(realization: ChannelRealization, profile: MseProfile, budgets,
                   resolution: int = 201) -> GridResult:
    """Minimum over a power grid of ``max_l MSE_l / beta_l`` (at most 4 devices)."""
    if realization.num_devices > 4:
        raise ValueError("grid oracle supports at most 4 devices in total")
    budgets = np.asarray(budgets, dtype=float)
    grids = np.meshgrid(*_grid_axes(budgets, resolution), indexing="ij")
    powers = np.stack(grids, axis=-1)
    beta = profile.beta if isinstance(profile, MseProfile) else np.asarray(profile, dtype=float)
    objective = np.full(powers.shape[:-1], -np.inf)
    for ell in range(realization.num_cells):
        own = realization.cell_of == ell
        cross = (powers[..., ~own] * realization.g_eff[~own, ell] ** 2).sum(axis=-1)
        mse = _cell_mse_grid(realization.h_abs[own], powers[..., own], cross, realization.noise_power)
        objective = np.maximum(objective, mse / beta[ell])
    best = np.unravel_index(np.argmin(objective), objective.shape)
    return GridResult(float(objective[best]), powers[best].copy(), _neighbour_spread(objective, best))


def grid_search_cell(problem: CellProblem, resolution: int = 201) -> GridResult:
    """Minimum of a cell's IT-constrained MSE over the feasible part of a power grid."""
    if problem.num_devices > 3:
        raise ValueError("grid oracle supports at most 3 devices per cell")
    grids = np.meshgrid(*_grid_axes(problem.budgets, resolution), indexing="ij")
    powers = np.stack(grids, axis=-1)
    mse = _cell_mse_grid(problem.h, powers, problem.incoming, problem.noise)
    caused = powers @ problem.leak
    feasible = np.all(caused <= problem.caps * (1 + 1e-12), axis=-1)
    masked = np.where(feasible, mse, np.inf)
    best = np.unravel_index(np.argmin(masked), masked.shape)
    return GridResult(float(masked[best]), powers[best].copy(), _neighbour_spread(mse, best))


def grid_search_p21(realization: ChannelRealization, ell: int, it: ItLevels, budgets,
                    resolution: int = 201) -> GridResult:
    return grid_search_cell(CellProblem.from_realization(realization, ell, it, budgets), resolution)

