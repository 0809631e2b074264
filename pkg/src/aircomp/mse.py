"""Per-cell AirComp MSE, optimal denoising, and a signal-level Monte-Carlo check.

MSE values follow the convention without the ``1/K_l**2`` factor, and the
noise power is the variance of the *real* receiver noise component.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .network import ChannelRealization, derive_rng

MC_BLOCK = 8192


@dataclass(frozen=True)
class Allocation:
    powers: np.ndarray
    eta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "powers", np.asarray(self.powers, dtype=float))
        object.__setattr__(self, "eta", np.asarray(self.eta, dtype=float))

    def check(self, budgets, atol: float = 1e-12) -> None:
        budgets = np.asarray(budgets, dtype=float)
        if np.any(self.powers < -atol) or np.any(self.powers > budgets * (1 + atol) + atol):
            raise ValueError("powers outside [0, budget]")
        if np.any(self.eta <= 0):
            raise ValueError("denoising factors must be positive")


@dataclass(frozen=True)
class Normalizer:
    """Affine pre-processing map to zero-mean unit-variance symbols, and its inverse."""

    mean: float
    std: float

    def __call__(self, x):
        return (np.asarray(x, dtype=float) - self.mean) / self.std

    def inverse(self, s):
        return np.asarray(s, dtype=float) * self.std + self.mean


def misalignment_mse(h_abs, powers, eta, interference, noise) -> float:
    """MSE of one cell from its own gains, the received interference and noise."""
    if not eta > 0:
        raise ValueError("denoising factor must be positive")
    h_abs = np.asarray(h_abs, dtype=float)
    powers = np.asarray(powers, dtype=float)
    align = np.sqrt(powers) * h_abs / math.sqrt(eta) - 1.0
    return float(np.sum(align**2) + (noise + interference) / eta)


def denoise_factor(h_abs, powers, interference, noise) -> float:
    """Denoising factor minimizing :func:`misalignment_mse` for fixed powers."""
    h_abs = np.asarray(h_abs, dtype=float)
    powers = np.asarray(powers, dtype=float)
    amplitude = float(np.sum(np.sqrt(powers) * h_abs))
    if amplitude <= 0:
        raise ValueError("no device in the cell transmits; denoising factor undefined")
    received = float(np.sum(powers * h_abs**2)) + interference + noise
    return (received / amplitude) ** 2


def optimal_cell_mse(h_abs, powers, interference, noise) -> float:
    """``K - (sum sqrt(p)|h|)^2 / (sum p|h|^2 + I + noise)``: the MSE at the optimal η.

    Equals ``K`` when no device transmits (the limit of an infinite η).
    """
    h_abs = np.asarray(h_abs, dtype=float)
    powers = np.asarray(powers, dtype=float)
    amplitude = float(np.sum(np.sqrt(powers) * h_abs))
    received = float(np.sum(powers * h_abs**2)) + interference + noise
    return len(h_abs) - amplitude**2 / received


def mse_of_cell(realization: ChannelRealization, allocation: Allocation, ell: int) -> float:
    idx = realization.devices(ell)
    return misalignment_mse(realization.h_abs[idx], allocation.powers[idx], float(allocation.eta[ell]),
                            realization.interference_power(allocation.powers, ell),
                            realization.noise_power)


def optimal_denoise(realization: ChannelRealization, powers, ell: int) -> float:
    idx = realization.devices(ell)
    powers = np.asarray(powers, dtype=float)
    return denoise_factor(realization.h_abs[idx], powers[idx],
                          realization.interference_power(powers, ell), realization.noise_power)


def optimal_denoise_all(realization: ChannelRealization, powers) -> np.ndarray:
    return np.array([optimal_denoise(realization, powers, ell) for ell in range(realization.num_cells)])


def mse_tuple(realization: ChannelRealization, powers) -> np.ndarray:
    """Per-cell MSE with every AP using its optimal denoising factor (``K_l`` for a silent cell)."""
    powers = np.asarray(powers, dtype=float)
    h_abs = realization.h_abs
    out = np.empty(realization.num_cells)
    for ell in range(realization.num_cells):
        idx = realization.devices(ell)
        out[ell] = optimal_cell_mse(h_abs[idx], powers[idx], realization.interference_power(powers, ell),
                                    realization.noise_power)
    return out


def _block_errors(realization, allocation, ell, block, size, seed):
    rng = derive_rng(seed, ell, block)
    cell = realization.cell_of == ell
    k_ell = int(cell.sum())
    s = rng.standard_normal((size, realization.num_devices))
    w = rng.standard_normal(size) * math.sqrt(realization.noise_power)

    amp = np.sqrt(allocation.powers)
    own = np.where(cell, realization.h_abs, realization.g_eff[:, ell]) * amp
    received = s @ own + w
    estimate = received / (k_ell * math.sqrt(allocation.eta[ell]))
    target = s[:, cell].mean(axis=1)
    return k_ell**2 * (estimate - target) ** 2


def empirical_mse_samples(realization: ChannelRealization, allocation: Allocation, ell: int,
                          num_trials: int, seed: int) -> np.ndarray:
    """Squared errors ``K^2 (f_hat - f)^2`` of ``num_trials`` simulated transmissions.

    Trials are drawn in fixed blocks of ``MC_BLOCK`` with a derived stream per
    block, so the samples do not depend on how the blocks are batched.
    """
    if num_trials < 1:
        raise ValueError("num_trials must be >= 1")
    chunks = []
    for block in range(-(-num_trials // MC_BLOCK)):
        size = min(MC_BLOCK, num_trials - block * MC_BLOCK)
        chunks.append(_block_errors(realization, allocation, ell, block, size, seed))
    return np.concatenate(chunks)


def empirical_mse(realization: ChannelRealization, allocation: Allocation, ell: int,
                  num_trials: int, seed: int) -> float:
    samples = empirical_mse_samples(realization, allocation, ell, num_trials, seed)
    return math.fsum(samples) / len(samples)
