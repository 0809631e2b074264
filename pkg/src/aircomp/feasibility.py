"""Phase-I feasibility test for the per-target second-order-cone system.

For a sum-MSE target ``eps`` and profile ``beta`` the cell constraints read

    sqrt(psi_l) * ||Sigma_l(q)||_2 <= q_l^T h_l,   psi_l = K_l - beta_l * eps,

with ``q = sqrt(p)`` boxed by ``sqrt(P_max)``.  ``Sigma_l(q)`` stacks the
received amplitudes ``q_k * a_{k,l}`` of every device (own gain inside cell l,
effective cross gain outside) and the noise amplitude.  The phase-I program
minimizes the largest violation ``t`` of these constraints.

Amplitudes span several orders of magnitude within a cell (path loss), so
each cell's constraint is divided by the median of its devices' full-power
amplitudes before solving, and verdicts use the violation *relative* to the
cell's received signal amplitude ``q_l^T h_l``.  A relative violation ``r``
bounds the MSE overshoot of the witness by about ``2 * psi_l * r``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .network import ChannelRealization


class PhaseOneError(RuntimeError):
    """The phase-I solver stopped without reaching its optimality tolerance."""

    def __init__(self, message: str, best_residual: float):
        super().__init__(f"{message} (best residual {best_residual:.3e})")
        self.best_residual = best_residual


@dataclass
class SocData:
    """Target-independent part of the cone system, over ``x = q / q_max`` in [0, 1]."""

    coupling: np.ndarray  # (K, L): own |h| or |g_eff|, times sqrt(P_max)
    cell_of: np.ndarray
    sigma: float
    q_max: np.ndarray
    cell_scale: np.ndarray  # (L,): median full-power own amplitude per cell
    _program: object = field(default=None, repr=False)

    @classmethod
    def from_realization(cls, realization: ChannelRealization, budgets) -> "SocData":
        q_max = np.sqrt(np.asarray(budgets, dtype=float))
        rows = np.arange(realization.num_devices)
        amp = np.abs(realization.g_eff).copy()
        amp[rows, realization.cell_of] = realization.h_abs
        coupling = amp * q_max[:, None]
        own = coupling[rows, realization.cell_of]
        cell_scale = np.array([np.median(own[realization.cell_of == ell])
                               for ell in range(realization.num_cells)])
        return cls(coupling=coupling, cell_of=realization.cell_of.copy(),
                   sigma=float(np.sqrt(realization.noise_power)), q_max=q_max, cell_scale=cell_scale)

    @property
    def num_cells(self) -> int:
        return self.coupling.shape[1]

    def own_gain(self) -> np.ndarray:
        """``sqrt(P_max)|h|`` of every device towards its own AP."""
        return self.coupling[np.arange(len(self.cell_of)), self.cell_of]

    def sigma_norms(self, x) -> np.ndarray:
        """``||Sigma_l||`` for every cell at normalized amplitudes ``x = q / q_max``."""
        x = np.asarray(x, dtype=float)
        return np.sqrt((x[:, None] ** 2 * self.coupling**2).sum(axis=0) + self.sigma**2)

    def signal(self, x) -> np.ndarray:
        """``q_l^T h_l`` for every cell."""
        return np.bincount(self.cell_of, weights=np.asarray(x) * self.own_gain(), minlength=self.num_cells)


@dataclass
class SocInstance:
    data: SocData
    psi: np.ndarray

    def violations(self, q) -> np.ndarray:
        """Per-cell ``sqrt(psi)||Sigma|| - q^T h`` at amplitudes ``q``."""
        x = np.asarray(q, dtype=float) / self.data.q_max
        return np.sqrt(self.psi) * self.data.sigma_norms(x) - self.data.signal(x)

    def residuals(self, q) -> np.ndarray:
        """Violations relative to each cell's signal amplitude ``q_l^T h_l``.

        A cell with zero signal gets 0 when its target is trivial and +inf otherwise.
        """
        x = np.asarray(q, dtype=float) / self.data.q_max
        viol = np.sqrt(self.psi) * self.data.sigma_norms(x) - self.data.signal(x)
        signal = self.data.signal(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.where(signal > 0, viol / signal, np.where(self.psi > 0, np.inf, 0.0))
        return rel


@dataclass(frozen=True)
class FeasibilityVerdict:
    feasible: bool
    q: np.ndarray | None
    residual: float

    @property
    def status(self) -> str:
        return "Feasible" if self.feasible else "Infeasible"


def build_instance(realization: ChannelRealization, beta, eps: float, budgets,
                   data: SocData | None = None) -> SocInstance:
    beta = np.asarray(beta, dtype=float)
    counts = np.bincount(realization.cell_of, minlength=realization.num_cells)
    eps_max = float(np.min(counts / beta))
    if eps < 0 or eps > eps_max * (1 + 1e-12):
        raise ValueError(f"target {eps} outside [0, {eps_max}]")
    psi = np.maximum(counts - beta * eps, 0.0)
    if data is None:
        data = SocData.from_realization(realization, budgets)
    return SocInstance(data=data, psi=psi)


def default_tolerance(instance: SocInstance) -> float:
    return 1e-6


def _cvx_program(data: SocData):
    import cvxpy as cp

    if data._program is None:
        n, num_cells = data.coupling.shape
        x = cp.Variable(n)
        t = cp.Variable()
        sqrt_psi = cp.Parameter(num_cells, nonneg=True)
        own = data.own_gain()
        cons = [x >= 0, x <= 1]
        for ell in range(num_cells):
            idx = np.flatnonzero(data.cell_of == ell)
            s = data.cell_scale[ell]
            stacked = cp.hstack([cp.multiply(data.coupling[:, ell] / s, x), np.array([data.sigma / s])])
            cons.append(sqrt_psi[ell] * cp.norm(stacked, 2) - (own[idx] / s) @ x[idx] <= t)
        data._program = (cp.Problem(cp.Minimize(t), cons), x, sqrt_psi)
    return data._program


def _solve_clarabel(instance: SocInstance, max_iters: int) -> np.ndarray:
    import cvxpy as cp

    problem, x, sqrt_psi = _cvx_program(instance.data)
    sqrt_psi.value = np.sqrt(instance.psi)
    try:
        with warnings.catch_warnings():
            # "optimal_inaccurate" is accepted; the verdict re-checks the point.
            warnings.simplefilter("ignore", UserWarning)
            problem.solve(solver=cp.CLARABEL, max_iter=max_iters, tol_gap_abs=1e-11,
                          tol_gap_rel=1e-11, tol_feas=1e-11)
    except cp.SolverError as exc:
        raise PhaseOneError(f"conic solver failed: {exc}", np.inf) from exc
    if problem.status not in ("optimal", "optimal_inaccurate") or x.value is None:
        raise PhaseOneError(f"conic solver status {problem.status}", np.inf)
    return np.clip(x.value, 0.0, 1.0)


def _solve_slsqp(instance: SocInstance, max_iters: int, x0) -> np.ndarray:
    from scipy.optimize import minimize

    data = instance.data
    n = len(data.cell_of)
    sqrt_psi = np.sqrt(instance.psi)
    own = data.own_gain()
    onehot = data.cell_of[:, None] == np.arange(data.num_cells)[None, :]

    scale = data.cell_scale

    def violation(x):
        return (sqrt_psi * data.sigma_norms(x) - data.signal(x)) / scale

    def violation_jac(x):
        # d/dx_k of sqrt(psi)||Sigma|| - own . x, per cell scale
        norms = data.sigma_norms(x)
        jac = sqrt_psi[None, :] * x[:, None] * data.coupling**2 / norms[None, :] - onehot * own[:, None]
        return jac.T / scale[:, None]

    x0 = np.ones(n) if x0 is None else np.clip(np.asarray(x0, dtype=float), 0.0, 1.0)
    z0 = np.append(x0, violation(x0).max())
    cons = {"type": "ineq",
            "fun": lambda z: z[-1] - violation(z[:-1]),
            "jac": lambda z: np.hstack([-violation_jac(z[:-1]), np.ones((data.num_cells, 1))])}
    res = minimize(lambda z: z[-1], z0, jac=lambda z: np.eye(n + 1)[-1], method="SLSQP",
                   bounds=[(0.0, 1.0)] * n + [(None, None)], constraints=[cons],
                   options={"maxiter": max_iters, "ftol": 1e-14})
    x = np.clip(res.x[:-1], 0.0, 1.0)
    if not res.success and res.status != 8:  # 8: positive directional derivative, usually at optimum
        raise PhaseOneError(f"SLSQP stopped: {res.message}", float(violation(x).max()))
    return x


def solve_phase1(instance: SocInstance, tol: float | None = None, max_iters: int = 200,
                 method: str = "clarabel", x0=None) -> FeasibilityVerdict:
    """Minimize the largest cone violation over the amplitude box.

    ``method`` is ``"clarabel"`` (interior point, default) or ``"slsqp"``
    (sequential quadratic programming from ``x0``, normalized amplitudes,
    default full amplitude).  The verdict is re-derived from the returned
    point: ``residual`` is the largest relative violation, and a Feasible
    witness satisfies every cone constraint within ``tol`` relative to the
    cell's signal amplitude.
    """
    tol = default_tolerance(instance) if tol is None else tol
    if not np.any(instance.psi > 0):
        x = np.zeros(len(instance.data.cell_of))
    elif method == "clarabel":
        x = _solve_clarabel(instance, max_iters)
    elif method == "slsqp":
        x = _solve_slsqp(instance, max_iters, x0)
    else:
        raise ValueError(f"unknown method {method!r}")
    q = x * instance.data.q_max
    residual = float(instance.residuals(q).max())
    return FeasibilityVerdict(feasible=residual <= tol, q=q if residual <= tol else None, residual=residual)
