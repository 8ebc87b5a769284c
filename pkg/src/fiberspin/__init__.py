"""Stationary rotational spinning of slender viscous fibers.

A library and CLI that solves the stationary Euler-frame fiber equations by
Lobatto IIIA collocation with continuation from the inviscid limit,
evaluates the closed-form existence bounds, and maps the parameter regime
where physically relevant stationary solutions exist.
"""

__version__ = "0.1.0"

from .analysis import (
    ClassificationReport,
    CriterionResult,
    Existence,
    Q0Bounds,
    classify,
    existence_criterion,
    p_kappa,
    q0_bounds,
    u_dd0_inviscid,
    u_dd0_viscous,
    uL_dd0_viscous,
)
from .bvp import (
    CollocationSystem,
    ContinuationSettings,
    Mesh,
    MeshSolution,
    Outcome,
    SolveReport,
    continuation_solve,
    inviscid_guess,
    solve_bvp,
    viscous_system,
)
from .errors import (
    DomainError,
    FiberSpinError,
    GuessFailure,
    NoBracket,
    NotConverged,
    OutOfSpan,
    ParameterError,
    PreconditionError,
    StepBudgetExceeded,
    StepUnderflow,
)
from .ivp import IvpConfig, Trajectory, integrate
from .model import (
    Centerline,
    InviscidState,
    LagrangianState,
    SpinParams,
    ViscousState,
    bc_residual_viscous,
    internal_energy,
    reconstruct_centerline,
    rhs_inviscid,
    rhs_lagrangian,
    rhs_viscous,
)
from .sweep import (
    BoundaryResult,
    SweepPlan,
    SweepRecord,
    export,
    find_boundary,
    read_csv,
    read_json,
    run_sweep,
)

__all__ = [name for name in dir() if not name.startswith("_")]
