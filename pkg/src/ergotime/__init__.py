"""Minimum-time ergodic coverage trajectory optimization.

Plan trajectories whose time-average matches an information density over a
bounded workspace, in the least time that keeps the spectral coverage
mismatch below a bound, under dynamics, control-box, workspace, and
obstacle-barrier constraints.  Solutions come with KKT reports and a
numerical check of the maximum-principle optimality structure.
"""

from .constraints import (
    CbfParams,
    ConstraintSet,
    Obstacle,
    ResidualBundle,
    cbf_residual,
    l4_barrier,
    residual_bundle,
)
from .distributions import (
    InfoDistribution,
    PhiCoefficients,
    eval_phi,
    gaussian_mixture,
    gridded,
    gridded_from_csv,
    phi_coefficients,
    uniform,
)
from .dynamics import (
    DynamicsModel,
    IntegratorKind,
    aircraft_3d,
    double_integrator_1d,
    double_integrator_2d,
    single_integrator_2d,
    step,
)
from .ergodic import (
    BasisIndex,
    BasisSet,
    ExtendedErgodicState,
    Workspace,
    basis_gradient,
    ergodic_metric,
    extended_state_terminal,
    fourier_basis,
    metric_from_extended_state,
    trajectory_coefficients,
)
from .errors import ContractError, DivergedError, DomainError
from .pmp import ExtendedTrajectory, PmpReport, check_conditions, hamiltonian, lift_and_costate
from .problem import DecisionVector, Mode, ProblemSpec
from .solver import (
    KktReport,
    Multipliers,
    SolveResult,
    SolverOptions,
    kkt_residuals,
    solve,
)
from .transcription import Gradients, gradients, initial_guess, objective

__version__ = "0.1.0"
