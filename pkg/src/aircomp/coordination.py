"""Pairwise decentralized updates of interference-temperature (IT) levels.

Two APs ``l`` and ``j`` share the sensitivities of their optimal MSEs to the
two IT levels that couple them and move both levels along a direction that
decreases both MSEs.  All exchanged values travel as typed messages over an
in-process backhaul, which keeps a replayable log.
"""
from __future__ import annotations

import json
import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .celldual import CellProblem, CellSolution, ItLevels, solve_cell
from .mse import Allocation, mse_tuple
from .network import ChannelRealization

log = logging.getLogger(__name__)


class PairStalled(RuntimeError):
    """No step down to the minimum step size decreased both MSEs of the pair."""


@dataclass(frozen=True)
class SensitivityMatrix:
    """Partial derivatives of the pair's optimal MSEs w.r.t. ``(G_lj, G_jl)``.

    Row one belongs to AP ``l`` (``a``, ``b``), row two to AP ``j`` (``c``, ``d``).
    """

    a: float
    b: float
    c: float
    d: float

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]])

    @property
    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    def normalized_det(self) -> float:
        """``det / (b c)``, which equals ``lam_lj lam_jl - 1``."""
        return self.det / (self.b * self.c)


def sensitivities(solution: CellSolution, j: int) -> tuple[float, float]:
    """``(dMSE/dG_out, dMSE/dG_in)`` of a solved cell towards neighbour ``j``: ``(-lam nu, nu)``."""
    idx = int(np.flatnonzero(solution.problem.neighbors == j)[0])
    return -float(solution.lam[idx]) * solution.nu, solution.nu


def direction(matrix: SensitivityMatrix, alpha: float) -> np.ndarray:
    """Step direction with ``matrix @ d = -|det| * [alpha, 1]``.

    ``alpha`` sets the ratio of the first AP's predicted MSE decrease to the second's.
    """
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    return _weighted_direction(matrix, alpha, 1.0)


def _weighted_direction(m: SensitivityMatrix, first: float, second: float) -> np.ndarray:
    sign = 1.0 if m.b * m.c - m.a * m.d >= 0 else -1.0
    return sign * np.array([first * m.d - second * m.b, second * m.a - first * m.c])


class MessageKind(str, Enum):
    IT_EXCHANGE = "ItExchange"
    SENSITIVITY_SHARE = "SensitivityShare"


@dataclass(frozen=True)
class BackhaulMessage:
    """One backhaul message.

    ``ItExchange`` carries ``gamma_out``/``gamma_in`` as seen by the sender (and
    ``step`` for proposals); ``tag`` is ``current``, ``proposal`` or ``commit``.
    ``SensitivityShare`` carries the sender's two sensitivities (``toward_out``
    = dMSE/dG_out, ``toward_in`` = dMSE/dG_in) and its resulting MSE.
    """

    kind: MessageKind
    sender: int
    receiver: int
    round: int
    tag: str
    payload: dict

    def __post_init__(self):
        if not all(np.isfinite(v) for v in self.payload.values()):
            raise ValueError(f"non-finite payload in {self.kind.value} message")

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "sender": self.sender, "receiver": self.receiver,
                "round": self.round, "tag": self.tag,
                "payload": {k: float(v) for k, v in self.payload.items()}}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, line: str) -> "BackhaulMessage":
        raw = json.loads(line)
        return cls(MessageKind(raw["kind"]), raw["sender"], raw["receiver"], raw["round"], raw["tag"],
                   raw["payload"])


class Backhaul:
    """Lossless ordered message queue between the APs of the active pair."""

    def __init__(self):
        self._queue: deque[BackhaulMessage] = deque()
        self.log: list[BackhaulMessage] = []
        self._pair: frozenset[int] | None = None

    def open(self, ell: int, j: int) -> None:
        if self._queue:
            raise RuntimeError("undelivered messages left from the previous pair")
        self._pair = frozenset((ell, j))

    def send(self, message: BackhaulMessage) -> None:
        if self._pair is None or {message.sender, message.receiver} != self._pair:
            raise ValueError("messages may only travel within the active pair")
        self._queue.append(message)
        self.log.append(message)

    def receive(self, receiver: int) -> BackhaulMessage:
        for message in self._queue:
            if message.receiver == receiver:
                self._queue.remove(message)
                return message
        raise LookupError(f"no message for AP {receiver}")

    def write_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for message in self.log:
                fh.write(message.to_json() + "\n")


def init_it_from_allocation(realization: ChannelRealization, powers) -> ItLevels:
    """IT levels equal to the interference each cell actually generates at each AP."""
    powers = np.asarray(powers, dtype=float)
    num_cells = realization.num_cells
    onehot = realization.cell_of[:, None] == np.arange(num_cells)[None, :]
    levels = onehot.T.astype(float) @ (powers[:, None] * realization.g_eff**2)
    return ItLevels(levels)


@dataclass(frozen=True)
class TraceRow:
    round: int
    pair: tuple[int, int] | None
    mse: np.ndarray


@dataclass
class CoordinationState:
    realization: ChannelRealization
    budgets: np.ndarray
    it: ItLevels
    solutions: list[CellSolution]
    solver_tol: float = 1e-10
    round: int = 0
    trace: list[TraceRow] = field(default_factory=list)

    @classmethod
    def start(cls, realization: ChannelRealization, it: ItLevels, budgets,
              solver_tol: float = 1e-10) -> "CoordinationState":
        budgets = np.asarray(budgets, dtype=float)
        state = cls(realization, budgets, it, [], solver_tol)
        state.solutions = [state.solve(ell, it) for ell in range(realization.num_cells)]
        state.trace.append(TraceRow(0, None, state.mse))
        return state

    def solve(self, ell: int, it: ItLevels) -> CellSolution:
        return solve_cell(CellProblem.from_realization(self.realization, ell, it, self.budgets),
                          tol=self.solver_tol)

    @property
    def mse(self) -> np.ndarray:
        """Per-cell optimal MSE of the IT-constrained problems (interference at its caps)."""
        return np.array([s.mse for s in self.solutions])

    def allocation(self) -> Allocation:
        powers = np.zeros(self.realization.num_devices)
        for ell, sol in enumerate(self.solutions):
            powers[self.realization.devices(ell)] = sol.powers
        return Allocation(powers, np.array([s.eta for s in self.solutions]))

    def matrix(self, ell: int, j: int) -> SensitivityMatrix:
        a, b = sensitivities(self.solutions[ell], j)
        d, c = sensitivities(self.solutions[j], ell)
        return SensitivityMatrix(a, b, c, d)


@dataclass(frozen=True)
class PairUpdate:
    it: ItLevels
    solutions: dict[int, CellSolution]
    step: float
    matrix: SensitivityMatrix


def initial_step(it: ItLevels, ell: int, j: int, noise: float, fraction: float = 0.1) -> float:
    """``fraction`` of the smaller positive IT level of the pair (of the noise power if both are zero)."""
    values = [v for v in (it.levels[ell, j], it.levels[j, ell]) if v > 0]
    return fraction * min(values, default=noise)


def update_pair(state: CoordinationState, ell: int, j: int, step: float, weights=(1.0, 1.0),
                min_step: float = 0.0, backhaul: Backhaul | None = None) -> PairUpdate:
    """One protocol exchange between APs ``ell`` and ``j`` with backtracking on ``step``.

    ``weights = (alpha, 1)`` reproduces the direction of :func:`direction`;
    the direction is scaled to unit max-norm, so ``step`` is in IT units.
    A trial is accepted when neither MSE increases and their sum decreases;
    otherwise the step is halved until it drops below ``min_step``.
    """
    backhaul = backhaul if backhaul is not None else Backhaul()
    backhaul.open(ell, j)
    rnd = state.round
    it = state.it

    # steps 1-4: exchange current levels, solve locally, share sensitivities
    for s, r in ((ell, j), (j, ell)):
        backhaul.send(BackhaulMessage(MessageKind.IT_EXCHANGE, s, r, rnd, "current",
                                      {"gamma_out": it.levels[s, r], "gamma_in": it.levels[r, s]}))
    for r in (ell, j):
        backhaul.receive(r)
    for s, r in ((ell, j), (j, ell)):
        out_, in_ = sensitivities(state.solutions[s], r)
        backhaul.send(BackhaulMessage(MessageKind.SENSITIVITY_SHARE, s, r, rnd, "current",
                                      {"toward_out": out_, "toward_in": in_,
                                       "mse": state.solutions[s].mse}))
    from_j = backhaul.receive(ell).payload
    from_l = backhaul.receive(j).payload
    matrix = SensitivityMatrix(from_l["toward_out"], from_l["toward_in"],
                               from_j["toward_in"], from_j["toward_out"])
    if step == 0:
        return PairUpdate(it, {}, 0.0, matrix)

    d = _weighted_direction(matrix, *weights)
    scale = np.max(np.abs(d))
    if not scale > 0 or not np.isfinite(scale):
        raise PairStalled(f"degenerate sensitivity matrix for pair ({ell}, {j})")
    d = d / scale

    base = np.array([it.levels[ell, j], it.levels[j, ell]])
    old = (state.solutions[ell].mse, state.solutions[j].mse)
    while step >= min_step and step > 0:
        trial = np.maximum(base + step * d, 0.0)
        candidate = it.with_pair(ell, j, trial[0], trial[1])
        backhaul.send(BackhaulMessage(MessageKind.IT_EXCHANGE, ell, j, rnd, "proposal",
                                      {"gamma_out": trial[0], "gamma_in": trial[1], "step": step}))
        backhaul.receive(j)
        sol_l = state.solve(ell, candidate)
        sol_j = state.solve(j, candidate)
        out_, in_ = sensitivities(sol_j, ell)
        backhaul.send(BackhaulMessage(MessageKind.SENSITIVITY_SHARE, j, ell, rnd, "proposal",
                                      {"toward_out": out_, "toward_in": in_, "mse": sol_j.mse}))
        new_j = backhaul.receive(ell).payload["mse"]
        if sol_l.mse <= old[0] and new_j <= old[1] and sol_l.mse + new_j < old[0] + old[1]:
            backhaul.send(BackhaulMessage(MessageKind.IT_EXCHANGE, ell, j, rnd, "commit",
                                          {"gamma_out": trial[0], "gamma_in": trial[1], "step": step}))
            backhaul.receive(j)
            return PairUpdate(candidate, {ell: sol_l, j: sol_j}, step, matrix)
        if np.all(trial == base):
            break
        step *= 0.5
    raise PairStalled(f"no improving step for pair ({ell}, {j})")


@dataclass(frozen=True)
class CoordinationParams:
    alpha: float | dict = 1.0
    step_fraction: float = 0.1
    det_tol: float = 1e-3
    tol: float = 1e-9
    max_rounds: int = 2000
    min_step_ratio: float = 1e-9
    solver_tol: float = 1e-10

    def weights(self, ell: int, j: int) -> tuple[float, float]:
        """Direction weights for the ordered pair; the reversed pair keeps the forward ratio."""
        lo, hi = min(ell, j), max(ell, j)
        alpha = self.alpha.get((lo, hi), 1.0) if isinstance(self.alpha, dict) else float(self.alpha)
        return (alpha, 1.0) if ell < j else (1.0, alpha)


@dataclass(frozen=True)
class CoordinationResult:
    it: ItLevels
    allocation: Allocation
    mse: np.ndarray
    true_mse: np.ndarray
    trace: list[TraceRow]
    rounds: int
    stop_reason: str
    messages: list[BackhaulMessage]
    solutions: list[CellSolution]

    def trace_array(self) -> np.ndarray:
        return np.array([row.mse for row in self.trace])


def run_algorithm2(realization: ChannelRealization, it_init: ItLevels, budgets,
                   params: CoordinationParams = CoordinationParams()) -> CoordinationResult:
    """Round-robin pairwise IT updates until the pairs are Pareto-stationary or progress stops.

    Stops when every pair has ``|lam_lj lam_jl - 1| <= det_tol`` (the sensitivity
    determinant normalized by ``nu_l nu_j``), when a round improves no cell's MSE by
    more than ``tol``, or after ``max_rounds`` rounds.
    """
    state = CoordinationState.start(realization, it_init, budgets, params.solver_tol)
    backhaul = Backhaul()
    num_cells = realization.num_cells
    pairs = [(ell, j) for ell in range(num_cells) for j in range(num_cells) if j != ell]
    steps = {}
    stop = "max_rounds"
    for rnd in range(1, params.max_rounds + 1):
        state.round = rnd
        if all(abs(state.matrix(ell, j).normalized_det()) <= params.det_tol for ell, j in pairs):
            stop = "pareto_stationary"
            break
        start = state.mse
        for ell, j in pairs:
            first = initial_step(state.it, ell, j, realization.noise_power, params.step_fraction)
            step = steps.get((ell, j), first)
            try:
                update = update_pair(state, ell, j, step, params.weights(ell, j),
                                     min_step=params.min_step_ratio * first, backhaul=backhaul)
            except PairStalled as exc:
                log.debug("round %d: %s", rnd, exc)
                steps[(ell, j)] = first
                continue
            state.it = update.it
            for cell, sol in update.solutions.items():
                state.solutions[cell] = sol
            steps[(ell, j)] = 2.0 * update.step
            state.trace.append(TraceRow(rnd, (ell, j), state.mse))
        if np.max(start - state.mse) <= params.tol:
            stop = "no_improvement"
            break
    allocation = state.allocation()
    return CoordinationResult(it=state.it, allocation=allocation, mse=state.mse,
                              true_mse=mse_tuple(realization, allocation.powers), trace=state.trace,
                              rounds=state.round, stop_reason=stop, messages=backhaul.log,
                              solutions=list(state.solutions))
