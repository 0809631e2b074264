"""Single-cell power control under interference-temperature (IT) constraints.

Each AP minimizes its own MSE with the incoming interference replaced by the
sum of the IT levels granted to it by its neighbours, while keeping the
interference it causes at every neighbour ``j`` below its own IT level.  In the
variables ``nu = 1/eta`` and ``Q_k = sqrt(p_k nu)`` the problem is jointly
convex; it is solved through its Lagrange dual, whose inner minimization has
the closed forms implemented below.  The dual variables ``lam`` (one per
outgoing IT constraint) are searched by bisection for a single neighbour and
by a deep-cut ellipsoid method otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _dualsearch
from .network import ChannelRealization


class DegenerateItLevels(ValueError):
    """IT levels that do not define a valid per-cell problem."""


class NonConvergence(RuntimeError):
    def __init__(self, message: str, gap: float):
        super().__init__(f"{message} (duality gap {gap:.3e})")
        self.gap = gap


@dataclass(frozen=True)
class ItLevels:
    """``levels[l, j]``: cap on the interference power cell ``l`` injects into AP ``j``."""

    levels: np.ndarray

    def __post_init__(self):
        levels = np.array(self.levels, dtype=float)
        np.fill_diagonal(levels, 0.0)
        if levels.ndim != 2 or levels.shape[0] != levels.shape[1]:
            raise ValueError("IT levels must be a square matrix")
        if np.any(levels < 0) or not np.all(np.isfinite(levels)):
            raise DegenerateItLevels("IT levels must be finite and nonnegative")
        object.__setattr__(self, "levels", levels)

    @property
    def num_cells(self) -> int:
        return self.levels.shape[0]

    def incoming(self, ell: int) -> float:
        return float(self.levels[:, ell].sum())

    def outgoing(self, ell: int) -> np.ndarray:
        return np.delete(self.levels[ell], ell)

    def neighbors(self, ell: int) -> np.ndarray:
        return np.delete(np.arange(self.num_cells), ell)

    def with_pair(self, ell: int, j: int, out_level: float, in_level: float) -> "ItLevels":
        """Copy with ``levels[ell, j]`` and ``levels[j, ell]`` replaced."""
        levels = self.levels.copy()
        levels[ell, j] = out_level
        levels[j, ell] = in_level
        return ItLevels(levels)


@dataclass(frozen=True)
class CellProblem:
    """Data of one cell's IT-constrained problem.

    ``leak[k, j]`` is the squared effective gain of device ``k`` towards the
    ``j``-th neighbour listed in ``neighbors`` and ``caps[j]`` the matching
    outgoing IT level; ``incoming`` is the total IT level granted to this AP.
    """

    h: np.ndarray
    leak: np.ndarray
    budgets: np.ndarray
    noise: float
    incoming: float
    caps: np.ndarray
    devices: np.ndarray | None = None
    neighbors: np.ndarray | None = None

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "budgets", np.asarray(self.budgets, dtype=float))
        caps = np.asarray(self.caps, dtype=float).reshape(-1)
        object.__setattr__(self, "caps", caps)
        object.__setattr__(self, "leak", np.asarray(self.leak, dtype=float).reshape(len(h), len(caps)))
        if np.any(caps < 0) or not np.all(np.isfinite(caps)) or self.incoming < 0:
            raise DegenerateItLevels("IT levels must be finite and nonnegative")
        if np.any(h <= 0):
            raise ValueError("direct gains must be positive")

    @classmethod
    def from_realization(cls, realization: ChannelRealization, ell: int, it: ItLevels,
                         budgets) -> "CellProblem":
        idx = realization.devices(ell)
        others = it.neighbors(ell)
        return cls(h=realization.h_abs[idx],
                   leak=realization.g_eff[np.ix_(idx, others)] ** 2,
                   budgets=np.asarray(budgets, dtype=float)[idx],
                   noise=realization.noise_power,
                   incoming=it.incoming(ell),
                   caps=it.outgoing(ell),
                   devices=idx, neighbors=others)

    @classmethod
    def isolated(cls, h, budgets, noise: float) -> "CellProblem":
        """A cell with no neighbours (plain single-cell problem)."""
        h = np.asarray(h, dtype=float)
        return cls(h=h, leak=np.zeros((len(h), 0)), budgets=budgets, noise=noise, incoming=0.0,
                   caps=np.zeros(0))

    @property
    def num_devices(self) -> int:
        return len(self.h)

    @property
    def effective_noise(self) -> float:
        return self.noise + self.incoming

    def weights(self, lam) -> np.ndarray:
        """``|h_k|^2 + sum_j lam_j |g_kj|^2``."""
        return self.h**2 + self.leak @ np.asarray(lam, dtype=float)

    def slack_coefficient(self, lam) -> float:
        """Coefficient of ``nu`` in the Lagrangian; must be >= 0 for a bounded dual."""
        return self.effective_noise - float(np.dot(lam, self.caps))


def policy_indicators(problem: CellProblem, lam) -> tuple[np.ndarray, np.ndarray]:
    """Indicators ``B_k`` and the stable ordering that sorts them ascending."""
    w = problem.weights(lam)
    b = problem.budgets * w**2 / problem.h**2
    return b, np.argsort(b, kind="stable")


def inner_q(problem: CellProblem, lam, nu: float) -> np.ndarray:
    """Minimizer of the Lagrangian over ``Q`` for fixed ``nu``."""
    return np.minimum(np.sqrt(problem.budgets * nu), problem.h / problem.weights(lam))


def lagrangian(problem: CellProblem, lam, q, nu: float) -> float:
    w = problem.weights(lam)
    return float(np.sum(w * q**2 - 2.0 * problem.h * q)) + problem.num_devices \
        + nu * problem.slack_coefficient(lam)


def leak_to_cap_ratio(problem: CellProblem, lam, w: np.ndarray | None = None) -> float:
    """Smallest ``nu`` keeping every IT constraint when all devices regularize-invert."""
    if len(problem.caps) == 0:
        return 0.0
    w = problem.weights(lam) if w is None else w
    leak = (problem.h**2 / w**2) @ problem.leak
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(leak > 0, leak / problem.caps, 0.0)
    return float(ratio.max())


def piece_value(problem: CellProblem, lam, k: int, nu: float) -> float:
    """Dual objective on the ``k``-th interval (``k`` devices, by ascending ``B``, at full power)."""
    b, order = policy_indicators(problem, lam)
    w = problem.weights(lam)[order]
    h = problem.h[order]
    pb = problem.budgets[order]
    c0 = problem.slack_coefficient(lam)
    full = slice(0, k)
    rest = slice(k, None)
    return float((np.sum(w[full] * pb[full]) + c0) * nu + k
                 - 2.0 * np.sum(h[full] * np.sqrt(pb[full])) * np.sqrt(nu)
                 + np.sum(1.0 - h[rest] ** 2 / w[rest]))


def inner_nu(problem: CellProblem, lam) -> tuple[float, int]:
    """Optimal ``nu`` of the dual function at ``lam`` and the number ``k*`` of full-power devices.

    The axis ``nu >= 0`` splits into ``K+1`` intervals on which the objective
    has a fixed form; on each the stationary point is clamped into the
    interval and the best of the ``K+1`` candidates is returned.  On the
    boundary where the coefficient of ``nu`` vanishes, the all-inversion
    interval is flat and the smallest ``nu`` honouring the IT constraints is
    taken.
    """
    nu, k, _ = _inner(problem, lam, problem.weights(lam))
    return nu, k


def _inner(problem: CellProblem, lam, w: np.ndarray) -> tuple[float, int, np.ndarray]:
    """``inner_nu`` plus the matching ``Q``, given the precomputed weights ``w``."""
    c0 = problem.effective_noise - float(np.dot(lam, problem.caps))
    if c0 < -1e-12 * problem.effective_noise:
        raise ValueError("dual variables violate the boundedness condition")
    if c0 <= 1e-12 * problem.effective_noise:
        c0 = 0.0  # on the boundary face up to rounding
    h, pb = problem.h, problem.budgets
    b = pb * w**2 / h**2
    order = np.argsort(b, kind="stable")
    ws, hs, pbs, bs = w[order], h[order], pb[order], b[order]

    area = np.cumsum(ws * pbs) + c0
    amplitude = np.cumsum(hs * np.sqrt(pbs))
    inverted = hs**2 / ws
    candidates = np.empty(len(h) + 1)
    candidates[1:] = np.clip((amplitude / area) ** 2, np.append(1.0 / bs[1:], 0.0), 1.0 / bs)
    # each clipped candidate lies in its own interval, where the objective has the closed form below
    tail = np.cumsum(inverted[::-1])[::-1]
    values = np.empty(len(h) + 1)
    values[1:] = area * candidates[1:] - 2.0 * amplitude * np.sqrt(candidates[1:]) - np.append(tail[1:], 0.0)
    if c0 > 0:
        candidates[0] = 1.0 / bs[0]
        values[0] = c0 * candidates[0] - tail[0]
    else:
        # the flat all-inversion piece may be pushed past its interval by the IT constraints
        candidates[0] = max(leak_to_cap_ratio(problem, lam, w), 1.0 / bs[0])
        q0 = np.minimum(np.sqrt(pb * candidates[0]), h / w)
        values[0] = float(np.sum(w * q0**2 - 2.0 * h * q0))
    k = int(np.argmin(values))
    if c0 == 0 and values[0] - values[k] <= 64 * np.finfo(float).eps * (abs(values[k]) + len(h)):
        k = 0  # ties with the flat piece go to the IT-respecting nu
    nu = float(candidates[k])
    return nu, k, np.minimum(np.sqrt(pb * nu), h / w)


def dual_subgradient(problem: CellProblem, q, nu: float) -> np.ndarray:
    """Supergradient of the dual function: outgoing leakage minus ``cap * nu``."""
    return (np.asarray(q) ** 2) @ problem.leak - problem.caps * nu


@dataclass(frozen=True)
class CellSolution:
    powers: np.ndarray
    eta: float
    nu: float
    q: np.ndarray
    lam: np.ndarray
    k_star: int
    mse: float
    dual_value: float
    indicators: np.ndarray
    iterations: int
    problem: CellProblem

    @property
    def gap(self) -> float:
        return self.mse - self.dual_value

    @property
    def outgoing_interference(self) -> np.ndarray:
        return self.powers @ self.problem.leak

    @property
    def full_power(self) -> np.ndarray:
        """Mask of devices whose indicator is at or below the threshold ``eta``."""
        return self.indicators <= self.eta

    def complementary_slackness(self) -> np.ndarray:
        """``lam_j (sum_k Q_k^2 |g_kj|^2 - cap_j nu)`` per neighbour."""
        return self.lam * dual_subgradient(self.problem, self.q, self.nu)


def _objective(problem: CellProblem, powers) -> tuple[float, float]:
    """Optimal-``eta`` MSE of the cell for ``powers`` and that ``eta``."""
    amplitude = float(np.sum(np.sqrt(powers) * problem.h))
    received = float(np.sum(powers * problem.h**2)) + problem.effective_noise
    if amplitude <= 0:
        return float(problem.num_devices), np.inf
    return problem.num_devices - amplitude**2 / received, (received / amplitude) ** 2


def solve_cell(problem: CellProblem, tol: float = 1e-6, max_iters: int = 5000) -> CellSolution:
    """Solve one cell's IT-constrained problem through its dual.

    Devices leaking into a neighbour with a zero IT level are silenced first.
    The remaining multipliers are found by bisection (one neighbour) or a deep-cut
    ellipsoid method (several); each dual evaluation also yields a feasible primal
    point (powers ``Q^2/nu`` scaled down onto the IT levels), and the search stops
    once the best primal and dual values are within ``tol``.
    """
    zero_cap = problem.caps <= 0
    active = ~np.any(problem.leak[:, zero_cap] > 0, axis=1)
    keep = ~zero_cap
    num_dual = int(keep.sum())
    total = problem.num_devices
    state = np.array([-np.inf, np.inf])
    best_lam = np.zeros(num_dual)
    sub_powers = np.zeros(int(active.sum()))
    iterations = 0
    if np.any(active):
        args = (np.ascontiguousarray(problem.h[active]),
                np.ascontiguousarray(problem.leak[np.ix_(active, keep)]),
                np.ascontiguousarray(problem.budgets[active]), float(problem.effective_noise),
                np.ascontiguousarray(problem.caps[keep]), total)
        if num_dual == 0:
            grad = np.empty(0)
            state[:] = _dualsearch.evaluate(*args[:5], best_lam, total, sub_powers, grad)
            iterations = 1
        elif num_dual == 1:
            iterations = _dualsearch.search_1d(*args, tol, max_iters, state, best_lam, sub_powers)
        else:
            iterations = _dualsearch.search_ellipsoid(*args, tol, max_iters, state, best_lam, sub_powers)
    else:
        state[:] = total
    best_dual, best_primal = state
    if best_primal - best_dual > tol:
        raise NonConvergence(f"dual search stopped after {iterations} iterations", best_primal - best_dual)

    lam = np.zeros(len(problem.caps))
    lam[keep] = best_lam
    powers = np.zeros(total)
    powers[active] = sub_powers
    mse, eta = _objective(problem, powers)
    nu = 0.0 if np.isinf(eta) else 1.0 / eta
    b, _ = policy_indicators(problem, lam)
    return CellSolution(powers=powers, eta=eta, nu=nu, q=np.sqrt(powers * nu), lam=lam,
                        k_star=int(np.sum(b <= eta)), mse=mse, dual_value=float(best_dual),
                        indicators=b, iterations=iterations, problem=problem)


def solve_p22(realization: ChannelRealization, ell: int, it: ItLevels, budgets, tol: float = 1e-6,
              max_iters: int = 5000) -> CellSolution:
    return solve_cell(CellProblem.from_realization(realization, ell, it, budgets), tol, max_iters)


@dataclass(frozen=True)
class ThresholdReport:
    passed: bool
    k_star: int
    full_power_ok: bool
    inversion_ok: bool
    bracket_ok: bool
    max_power_error: float


def verify_threshold_structure(solution: CellSolution, rtol: float = 1e-4) -> ThresholdReport:
    """Check the full-power / regularized-inversion split around the threshold ``eta``.

    Devices sorted by ascending indicator: the first ``k*`` transmit at full
    budget, the rest with ``|h|^2 eta / (|h|^2 + sum lam |g|^2)^2``, and
    ``B_(k*) <= eta <= B_(k*+1)``.  Devices silenced by a zero IT level are skipped.
    """
    problem = solution.problem
    if np.isinf(solution.eta):
        silent = bool(np.all(solution.powers == 0))
        return ThresholdReport(silent, 0, silent, silent, silent, float(np.max(solution.powers, initial=0)))
    w = problem.weights(solution.lam)
    b = solution.indicators
    order = np.argsort(b, kind="stable")
    k = solution.k_star
    full, rest = order[:k], order[k:]
    inversion = problem.h**2 * solution.eta / w**2
    scale = problem.budgets
    err_full = np.abs(solution.powers[full] - problem.budgets[full]) / scale[full]
    err_inv = np.abs(solution.powers[rest] - inversion[rest]) / scale[rest]
    full_ok = bool(np.all(err_full <= rtol))
    inv_ok = bool(np.all(err_inv <= rtol))
    lower_ok = k == 0 or b[order[k - 1]] <= solution.eta * (1 + rtol)
    upper_ok = k == len(b) or solution.eta <= b[order[k]] * (1 + rtol)
    worst = float(np.max(np.concatenate([err_full, err_inv]), initial=0.0))
    return ThresholdReport(full_ok and inv_ok and lower_ok and upper_ok, k, full_ok, inv_ok,
                           bool(lower_ok and upper_ok), worst)
