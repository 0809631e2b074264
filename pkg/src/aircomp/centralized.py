"""Centralized power control: bisection over the sum-MSE target and Pareto sweeps."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .feasibility import SocData, build_instance, solve_phase1
from .mse import Allocation, denoise_factor, mse_of_cell
from .network import ChannelRealization

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MseProfile:
    """Target ratios of every cell's MSE to the sum MSE."""

    beta: np.ndarray

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        object.__setattr__(self, "beta", beta)
        if beta.ndim != 1 or np.any(~(beta > 0)):
            raise ValueError("profile entries must be positive (use e.g. 1e-6 for top priority)")
        if abs(beta.sum() - 1.0) > 1e-12:
            raise ValueError(f"profile must sum to one, got {beta.sum()!r}")

    @classmethod
    def from_mse(cls, mse) -> "MseProfile":
        """The ray through an achieved MSE tuple."""
        mse = np.asarray(mse, dtype=float)
        beta = mse / mse.sum()
        beta[-1] = 1.0 - beta[:-1].sum()
        return cls(beta)

    @classmethod
    def uniform(cls, num_cells: int) -> "MseProfile":
        return cls.from_mse(np.ones(num_cells))


@dataclass(frozen=True)
class CentralizedSolution:
    eps: float
    powers: np.ndarray
    eta: np.ndarray
    mse: np.ndarray
    eps_low: float
    eps_high: float
    steps: int

    @property
    def allocation(self) -> Allocation:
        return Allocation(self.powers, self.eta)


def solve_p1(realization: ChannelRealization, profile: MseProfile, budgets,
             bisect_tol: float = 1e-4, phase_tol: float | None = None,
             method: str = "clarabel") -> CentralizedSolution:
    """Minimize the sum MSE along the ray ``profile`` (MSE-profiling problem).

    Bisection on ``[0, min_l K_l / beta_l]``; every midpoint is settled by the
    phase-I test and the witness of the last feasible midpoint gives the powers.
    Denoising factors are then set optimally for those powers.
    """
    if bisect_tol <= 0:
        raise ValueError("bisect_tol must be positive")
    beta = profile.beta
    num_cells = realization.num_cells
    if len(beta) != num_cells:
        raise ValueError("profile length differs from the number of cells")
    counts = np.bincount(realization.cell_of, minlength=num_cells)
    data = SocData.from_realization(realization, budgets)
    if phase_tol is None:
        # relative cone violation r overshoots MSE_l by about 2 * K_l * r
        phase_tol = min(1e-6, bisect_tol / (20 * counts.max()))

    lo, hi = 0.0, float(np.min(counts / beta))
    witness = None
    steps = 0
    while hi - lo > bisect_tol:
        mid = 0.5 * (lo + hi)
        verdict = solve_phase1(build_instance(realization, beta, mid, budgets, data), tol=phase_tol,
                               method=method)
        steps += 1
        if verdict.feasible:
            hi, witness = mid, verdict.q
        else:
            lo = mid
    if witness is None:
        # Only the upper end, where some cell may stay silent, is left untested.
        verdict = solve_phase1(build_instance(realization, beta, hi, budgets, data), tol=phase_tol,
                               method=method)
        if not verdict.feasible:
            raise RuntimeError("no feasible sum-MSE target found on the bisection interval")
        witness = verdict.q

    powers = np.minimum(witness**2, np.asarray(budgets, dtype=float))
    eta = np.empty(num_cells)
    mse = np.empty(num_cells)
    h_abs = realization.h_abs
    for ell in range(num_cells):
        idx = realization.devices(ell)
        interference = realization.interference_power(powers, ell)
        if np.sum(np.sqrt(powers[idx]) * h_abs[idx]) > 0:
            eta[ell] = denoise_factor(h_abs[idx], powers[idx], interference, realization.noise_power)
        else:
            eta[ell] = np.inf
        mse[ell] = mse_of_cell(realization, Allocation(powers, eta), ell)
    return CentralizedSolution(eps=0.5 * (lo + hi), powers=powers, eta=eta, mse=mse,
                               eps_low=lo, eps_high=hi, steps=steps)


@dataclass(frozen=True)
class ParetoPoint:
    beta: np.ndarray
    mse: np.ndarray | None
    eps: float
    error: str | None = None


def pareto_sweep(realization: ChannelRealization, profiles, budgets,
                 bisect_tol: float = 1e-4) -> list[ParetoPoint]:
    """Solve the profiling problem for every profile; failures are recorded, not raised."""
    points = []
    for profile in profiles:
        beta = profile.beta if isinstance(profile, MseProfile) else np.asarray(profile, dtype=float)
        try:
            sol = solve_p1(realization, profile if isinstance(profile, MseProfile) else MseProfile(beta),
                           budgets, bisect_tol)
        except Exception as exc:  # noqa: BLE001 - recorded per profile
            log.warning("profile %s failed: %s", beta, exc)
            points.append(ParetoPoint(beta, None, np.nan, f"{type(exc).__name__}: {exc}"))
        else:
            points.append(ParetoPoint(beta, sol.mse, sol.eps))
    return points


def two_cell_profiles(num: int = 9) -> list[MseProfile]:
    """Profiles ``(t, 1 - t)`` for ``num`` evenly spaced ``t`` in (0, 1)."""
    return [MseProfile.from_mse([t, 1.0 - t]) for t in np.linspace(0, 1, num + 2)[1:-1]]
