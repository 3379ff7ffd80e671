"""Distributed generalized Nash equilibrium seeking over networks.

Synchronous (SD-GENO) and asynchronous (AD-GEED, AD-GENO) operator-splitting
solvers for strongly monotone games with affine coupling constraints, plus an
independent projection-based oracle, Cournot test-problem generators, and a
compiled simulation core with a pure-Python twin.
"""

from .asynchronous import (ActivationModel, AsyncResult, DelayModel, MaskSet,
                           adgeed_step, adgeno_step, build_masks,
                           build_problem, dump_schedule, load_schedule,
                           next_activation, parse_schedule, read_delayed,
                           replay_models, run_async, save_schedule,
                           trace_equivalence)
from .backend import (active_backend, available_backends, make_sim,
                      set_backend)
from .cournot import (CournotSpec, generate_instance, random_connected_graph,
                      scenario_config, sweep_instance)
from .game import (AffineCoupling, BoxSet, CommGraph, CostModel,
                   DisconnectedGraph, GameInstance, NonConvergence,
                   NotStronglyMonotone, ValidationReport, game_from_dict,
                   game_to_dict, incidence_matrix, laplacian, load_game,
                   monotonicity_constants, project_box, pseudo_gradient,
                   quadratic_cost_model, quadratic_game, save_game,
                   validate_game)
from .metrics import TRACE_FIELDS, MetricsTrace, relative_distance
from .oracle import (Infeasible, OracleSolution, brute_force_equilibrium,
                     project_feasible, recover_multiplier, slater_margin,
                     vgne_oracle)
from .splitting import (KktResidual, StepConfig, ThetaTooSmall,
                        cocoercivity_constant, derive_steps, eta_bound_async,
                        eta_bound_sync, kkt_residual, phi_matrix)
from .svg import render_convergence_svg, save_convergence_svg
from .sync import (SolveResult, SyncState, gather_disagreement, sdgeno_solve,
                   sdgeno_step)

__version__ = "0.1.0"

__all__ = [
    "ActivationModel", "AffineCoupling", "AsyncResult", "BoxSet", "CommGraph",
    "CostModel", "CournotSpec", "DelayModel", "DisconnectedGraph",
    "GameInstance", "Infeasible", "KktResidual", "MaskSet", "MetricsTrace",
    "NonConvergence", "NotStronglyMonotone", "OracleSolution", "SolveResult",
    "StepConfig", "SyncState", "ThetaTooSmall", "TRACE_FIELDS",
    "ValidationReport", "active_backend", "adgeed_step", "adgeno_step",
    "available_backends", "brute_force_equilibrium", "build_masks",
    "build_problem", "cocoercivity_constant", "derive_steps", "dump_schedule",
    "eta_bound_async", "eta_bound_sync", "game_from_dict", "game_to_dict",
    "gather_disagreement", "generate_instance", "incidence_matrix",
    "kkt_residual", "laplacian", "load_game", "load_schedule", "make_sim",
    "monotonicity_constants", "next_activation", "parse_schedule",
    "phi_matrix", "project_box", "project_feasible", "pseudo_gradient",
    "quadratic_cost_model", "quadratic_game", "random_connected_graph",
    "read_delayed", "recover_multiplier", "relative_distance",
    "render_convergence_svg", "replay_models", "run_async",
    "save_convergence_svg", "save_game", "save_schedule", "scenario_config",
    "sdgeno_solve", "sdgeno_step", "set_backend", "slater_margin",
    "sweep_instance", "trace_equivalence", "validate_game", "vgne_oracle",
    "__version__",
]
