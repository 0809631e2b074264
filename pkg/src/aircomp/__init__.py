"""Power control for multi-cell over-the-air computation (AirComp).

Centralized MSE-region search by bisection over second-order-cone
feasibility problems, per-cell solvers under interference-temperature
constraints, pairwise decentralized coordination, and benchmark schemes.
"""
from .baselines import BaselineKind, BaselineResult, grid_search_cell, grid_search_p1, grid_search_p21, run_baseline
from .celldual import (CellProblem, CellSolution, DegenerateItLevels, ItLevels, NonConvergence, inner_nu, inner_q,
                       policy_indicators, solve_cell, solve_p22, verify_threshold_structure)
from .centralized import CentralizedSolution, MseProfile, ParetoPoint, pareto_sweep, solve_p1, two_cell_profiles
from .config import ConfigError, RunConfig, parse_config, serialize_config
from .coordination import (Backhaul, BackhaulMessage, CoordinationParams, CoordinationResult, PairStalled,
                           SensitivityMatrix, direction, init_it_from_allocation, run_algorithm2, sensitivities,
                           update_pair)
from .feasibility import FeasibilityVerdict, PhaseOneError, build_instance, solve_phase1
from .mse import (Allocation, Normalizer, denoise_factor, empirical_mse, misalignment_mse, mse_of_cell, mse_tuple,
                  optimal_cell_mse, optimal_denoise)
from .network import (ChannelRealization, NetworkScenario, PathLoss, draw_realization, place_devices,
                      sample_channels, three_cell_scenario, two_cell_scenario)

__all__ = [name for name in dir() if not name.startswith("_")]
