"""Implicit time stepping for a nonlocal Penrose-Fife phase-field system with inertia.

The state at each time level is ``(u, theta, phi, v)`` with ``theta = -1/u``.
A step solves a singular elliptic problem for ``u`` and a pointwise monotone
equation for ``phi``, coupled through a contracting fixed-point iteration.
"""
from .config import ScenarioConfig, build_problem, load_config, parse_config, serialize_config
from .diagnostics import (CheckResult, EstimateRecord, bochner_norms, check_identities,
                          export_estimates_csv, monitor, norms, record_suprema, weak_residual)
from .domain import (FieldState, NonlinearitySpec, ProblemSpec, SpatialMesh, ValidationReport,
                     cubic_beta, initial_state, linear_beta, piecewise_beta, polynomial_beta,
                     validate_problem)
from .elliptic import (RobinOperator, assemble_robin, dual_h1_norm, riesz_representative,
                       solve_singular_elliptic)
from .errors import *  # noqa: F401,F403
from .kernel import (KernelTable, build_kernel, constant_kernel, convolve, gaussian_kernel,
                     nonlocal_term, tabulated_kernel, zero_kernel)
from .rates import (CauchyErrors, RateFit, RateReport, cauchy_from_trajectories, cauchy_pair,
                    fit_rate, one_star, run_ladder)
from .scenarios import default_problem, homogeneous_problem, piecewise_in_time
from .stepper import (DiscreteTrajectory, StepStats, TimeGrid, average_data, eval_bar, eval_hat,
                      export_trajectory_csv, find_max_step, fixed_point_step, phi_map, psi_map,
                      run, solve_phase_equation)

__version__ = "0.1.0"
