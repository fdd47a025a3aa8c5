"""Solver and stability toolkit for doubly nonlinear degenerate parabolic
problems on the unit interval."""

__version__ = "0.1.0"

from .discretization import (
    FluxLaw,
    Mesh1D,
    build_mesh,
    linear_heterogeneous,
    lumped_mass,
    mobility_flux,
    p_laplace_flux,
)
from .monotone import (
    MonotoneGraph,
    NonlinearityPair,
    PiecewiseLinear,
    SmoothFunction,
    preset_graph,
    preset_pair,
    resolvent_decompose,
    recompose_graph,
    verify_pair_hypotheses,
)
from .solver import (
    DiscreteSolution,
    ProblemSpec,
    SolverConfig,
    SolverError,
    apriori_bounds,
    energy_audit,
    solve,
)
from .metrics import Trajectory, lp_w1p_gap, sup_time_l2, time_translate_profile, weak_uniform_metric
from .stability import make_family, run_sweep
from .dual import solve_dual_backward, uniqueness_witness
