import numpy as np
import pytest

from aircomp.celldual import CellProblem
from aircomp.network import ChannelRealization, draw_realization, two_cell_scenario


def unit_realization(num_cells=1, cross=0.0, noise=1.0):
    """One device per cell with unit direct gain and a common cross gain."""
    g = np.full((num_cells, num_cells), cross)
    return ChannelRealization.from_gains(np.ones(num_cells), g, np.arange(num_cells), noise)


def random_small_realization(rng, devices_per_cell=(1, 1), noise=None):
    """Unit-scale gains, convenient for oracles (no path loss)."""
    cell_of = np.repeat(np.arange(len(devices_per_cell)), devices_per_cell)
    n = len(cell_of)
    h = rng.uniform(0.3, 2.0, n) * np.exp(1j * rng.uniform(0, 2 * np.pi, n))
    g_eff = rng.uniform(-1.0, 1.0, (n, len(devices_per_cell)))
    noise = rng.uniform(0.05, 1.0) if noise is None else noise
    real = ChannelRealization.from_gains(np.abs(h), g_eff, cell_of, noise)
    return real


def random_cell_problem(rng, num_devices, num_neighbors, binding=True):
    """Normalized-unit single-cell problem; IT caps sized to bind when ``binding``."""
    h = rng.uniform(0.2, 2.0, num_devices)
    leak = rng.uniform(0.0, 1.0, (num_devices, num_neighbors)) ** 2
    budgets = rng.uniform(0.5, 2.0, num_devices)
    full = budgets @ leak
    caps = full * (rng.uniform(0.05, 0.6, num_neighbors) if binding else rng.uniform(2.0, 5.0, num_neighbors))
    return CellProblem(h=h, leak=leak, budgets=budgets, noise=float(rng.uniform(0.05, 1.0)),
                       incoming=float(rng.uniform(0.0, 1.0)), caps=caps,
                       devices=np.arange(num_devices), neighbors=np.arange(1, num_neighbors + 1))


@pytest.fixture(scope="session")
def standard_two_cell():
    scenario = two_cell_scenario()
    return scenario, draw_realization(scenario, seed=11)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
