"""Stationary model of a slender viscous fiber spun from a rotating drum.

State variables follow the Euler (arc-length) frame: tangential speed u,
internal-energy observable q = u - delta*u'/u - kappa/sqrt(u), radial
coordinate r of the centerline, and the angle beta between the tangent and
the radial direction.  Three formulations are provided:

* the viscous first-order system in (u, q, r, beta),
* the reduced inviscid system in the rescaled speed v = epsilon*u,
* the Lagrangian (flight-time) system in (u_L, q_L, r_L, beta_L).

All right-hand sides accept either a single state (1-D array) or a batch of
states stacked along the trailing axis, and raise :class:`DomainError` as
soon as a state leaves the physical domain instead of returning non-finite
numbers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError

# Guard thresholds below which a state counts as outside the physical domain.
U_MIN = 1e-12
Q_MIN = 1e-12


@dataclass(frozen=True)
class SpinParams:
    """Dimensionless parameter set of one spinning configuration.

    delta   : viscosity number, 3/Re
    epsilon : Rossby number (inverse scaled rotation frequency)
    kappa   : surface-tension number, sqrt(pi)/(2 We); must satisfy kappa < 1
    length  : fiber arc length L
    """

    delta: float
    epsilon: float
    kappa: float
    length: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.delta) or self.delta < 0:
            raise ParameterError(f"delta must be >= 0, got {self.delta}")
        if not np.isfinite(self.epsilon) or self.epsilon <= 0:
            raise ParameterError(f"epsilon must be > 0, got {self.epsilon}")
        if not np.isfinite(self.kappa) or self.kappa < 0 or self.kappa >= 1:
            raise ParameterError(
                f"kappa must lie in [0, 1), got {self.kappa}: physically "
                "relevant solutions require 0 <= kappa < 1"
            )
        if not np.isfinite(self.length) or self.length <= 0:
            raise ParameterError(f"length must be > 0, got {self.length}")

    @property
    def lam(self) -> float:
        """Rescaled surface-tension number lambda = epsilon^(3/2) * kappa."""
        return self.epsilon**1.5 * self.kappa

    @property
    def ratio(self) -> float:
        """The regime parameter delta / epsilon^2."""
        return self.delta / self.epsilon**2


@dataclass(frozen=True)
class ViscousState:
    """Euler-frame state (u, q, r, beta) of the viscous system."""

    u: float
    q: float
    r: float
    beta: float

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.q, self.r, self.beta], dtype=float)


@dataclass(frozen=True)
class InviscidState:
    """Rescaled state (v, r, beta) of the reduced inviscid system, v = epsilon*u."""

    v: float
    r: float
    beta: float

    def as_array(self) -> np.ndarray:
        return np.array([self.v, self.r, self.beta], dtype=float)


@dataclass(frozen=True)
class LagrangianState:
    """Flight-time state (u_L, q_L, r_L, beta_L)."""

    u: float
    q: float
    r: float
    beta: float

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.q, self.r, self.beta], dtype=float)


@dataclass(frozen=True)
class Centerline:
    """Sampled fiber centerline in the rotating frame.

    Arrays are aligned: sample i is (s[i], phi[i], x[i], y[i], area[i]) with
    x = r*cos(phi), y = r*sin(phi) and cross-section area A = 1/u (unit mass
    flux A*u = 1).
    """

    s: np.ndarray
    phi: np.ndarray
    x: np.ndarray
    y: np.ndarray
    area: np.ndarray

    def __len__(self) -> int:
        return len(self.s)


# ---------------------------------------------------------------------------
# Array-level right-hand sides (hot path for the solvers)
# ---------------------------------------------------------------------------

def _check_viscous_domain(u, q, r):
    if np.any(u <= U_MIN):
        raise DomainError(f"speed u <= {U_MIN:g}")
    if np.any(np.abs(q) <= Q_MIN):
        raise DomainError(f"|q| <= {Q_MIN:g}")
    if np.any(r <= 0):
        raise DomainError("radius r <= 0")


def viscous_rhs(y: np.ndarray, params: SpinParams) -> np.ndarray:
    """d/ds of (u, q, r, beta); `y` has shape (4,) or (4, m)."""
    u, q, r, beta = y
    _check_viscous_domain(u, q, r)
    eps2 = params.epsilon**2
    cosb = np.cos(beta)
    sinb = np.sin(beta)
    du = u * (u - params.kappa / np.sqrt(u) - q) / params.delta
    dq = r * cosb / (eps2 * u)
    dr = cosb
    dbeta = (-2.0 / params.epsilon - (r * r / (eps2 * u) + q) * sinb / r) / q
    return np.stack([du, dq, dr, dbeta])


def viscous_jacobian(y: np.ndarray, params: SpinParams) -> np.ndarray:
    """Jacobian of :func:`viscous_rhs` w.r.t. (u, q, r, beta), shape (4, 4[, m])."""
    u, q, r, beta = y
    _check_viscous_domain(u, q, r)
    eps = params.epsilon
    eps2 = eps * eps
    kappa = params.kappa
    delta = params.delta
    sqrtu = np.sqrt(u)
    cosb = np.cos(beta)
    sinb = np.sin(beta)
    zero = np.zeros_like(u)

    J = np.empty((4, 4) + np.shape(u), dtype=float)
    # u' = (u^2 - kappa*sqrt(u) - q*u) / delta
    J[0, 0] = (2.0 * u - 0.5 * kappa / sqrtu - q) / delta
    J[0, 1] = -u / delta
    J[0, 2] = zero
    J[0, 3] = zero
    # q' = r cos(beta) / (eps^2 u)
    J[1, 0] = -r * cosb / (eps2 * u * u)
    J[1, 1] = zero
    J[1, 2] = cosb / (eps2 * u)
    J[1, 3] = -r * sinb / (eps2 * u)
    # r' = cos(beta)
    J[2, 0] = zero
    J[2, 1] = zero
    J[2, 2] = zero
    J[2, 3] = -sinb
    # beta' = -2/(eps q) - r sin(beta)/(eps^2 u q) - sin(beta)/r
    J[3, 0] = r * sinb / (eps2 * u * u * q)
    J[3, 1] = 2.0 / (eps * q * q) + r * sinb / (eps2 * u * q * q)
    J[3, 2] = -sinb / (eps2 * u * q) + sinb / (r * r)
    J[3, 3] = -r * cosb / (eps2 * u * q) - cosb / r
    return J


def inviscid_rhs(y: np.ndarray, params: SpinParams) -> np.ndarray:
    """d/ds of (v, r, beta) for the reduced inviscid system; shape (3[, m])."""
    v, r, beta = y
    lam = params.lam
    if np.any(v <= 0):
        raise DomainError("rescaled speed v <= 0")
    if np.any(r <= 0):
        raise DomainError("radius r <= 0")
    if np.any(v**3 <= lam * lam):
        raise DomainError("v^3 <= lambda^2: angle equation singular")
    sqrtv = np.sqrt(v)
    cosb = np.cos(beta)
    sinb = np.sin(beta)
    dv = r * cosb / (v + lam / (2.0 * sqrtv))
    dr = cosb
    w = v - lam / sqrtv
    dbeta = -2.0 / w - (r * r / (v * w) + 1.0) * sinb / r
    return np.stack([dv, dr, dbeta])


def lagrangian_rhs(y: np.ndarray, params: SpinParams) -> np.ndarray:
    """d/dt of (u_L, q_L, r_L, beta_L) in flight time; shape (4[, m]).

    For delta = 0 the speed equation degenerates to an algebraic constraint;
    its time derivative eps^2 * du = r cos(beta) / (1 + kappa/(2 u^(3/2)))
    is used instead.
    """
    u, q, r, beta = y
    _check_viscous_domain(u, q, r)
    eps = params.epsilon
    eps2 = eps * eps
    kappa = params.kappa
    cosb = np.cos(beta)
    sinb = np.sin(beta)
    if params.delta > 0:
        du = u * u * (u - kappa / np.sqrt(u) - q) / params.delta
    else:
        du = r * cosb / (eps2 * (1.0 + kappa / (2.0 * u**1.5)))
    dq = r * cosb / eps2
    dr = u * cosb
    dbeta = -2.0 * u / (eps * q) - (r * r / (eps2 * q) + u) * sinb / r
    return np.stack([du, dq, dr, dbeta])


# ---------------------------------------------------------------------------
# Spec-level operations on state objects
# ---------------------------------------------------------------------------

def rhs_viscous(state: ViscousState, params: SpinParams) -> np.ndarray:
    """Right-hand side (u', q', r', beta') of the viscous system at `state`."""
    return viscous_rhs(state.as_array(), params)


def rhs_inviscid(state: InviscidState, params: SpinParams) -> np.ndarray:
    """Right-hand side (v', r', beta') of the reduced inviscid system."""
    return inviscid_rhs(state.as_array(), params)


def rhs_lagrangian(state: LagrangianState, params: SpinParams) -> np.ndarray:
    """Right-hand side (du, dq, dr, dbeta)/dt of the flight-time system."""
    return lagrangian_rhs(state.as_array(), params)


def bc_residual_viscous(
    left: ViscousState, right: ViscousState, params: SpinParams
) -> np.ndarray:
    """Boundary residual (u(0)-1, r(0)-1, beta(0), q(L)-u(L)+2k/sqrt(u(L))).

    All four components vanish iff the nozzle conditions hold at s=0 and the
    viscous stress balances surface tension at the free end s=L.
    """
    if right.u <= 0:
        raise DomainError("end speed u(L) <= 0")
    return np.array(
        [
            left.u - 1.0,
            left.r - 1.0,
            left.beta,
            right.q - right.u + 2.0 * params.kappa / np.sqrt(right.u),
        ]
    )


def internal_energy(u: float, u_prime: float, params: SpinParams):
    """Internal energy q = u - delta*u'/u - kappa/sqrt(u).

    Sum of kinetic energy u, viscous stress energy -delta*u'/u and surface
    potential -kappa/sqrt(u).  For delta = 0 the result is independent of
    the speed gradient.
    """
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0):
        raise DomainError("speed u <= 0")
    return u - params.delta * np.asarray(u_prime, dtype=float) / u - params.kappa / np.sqrt(u)


def reconstruct_centerline(solution, rel_tol: float = 1e-10) -> Centerline:
    """Recover the planar centerline from a solved (u, q, r, beta) profile.

    Integrates the polar angle phi' = sin(beta)/r with phi(0) = 0 over the
    solution's own mesh and returns samples at the mesh breakpoints with
    x = r cos(phi), y = r sin(phi) and cross section A = 1/u.

    `solution` must expose `breakpoints` and `evaluate(s)` returning the four
    state components (a MeshSolution does).
    """
    from .ivp import IvpConfig, integrate

    s_nodes = np.asarray(solution.breakpoints, dtype=float)

    def phi_rhs(s, phi):
        u, q, r, beta = solution.evaluate(s)
        if r <= 0:
            raise DomainError("radius r <= 0 along the solution")
        return np.array([np.sin(beta) / r])

    traj = integrate(
        phi_rhs,
        np.array([0.0]),
        (s_nodes[0], s_nodes[-1]),
        IvpConfig(rel_tol=rel_tol, abs_tol=rel_tol * 1e-2),
    )
    if traj.domain_stop is not None:
        raise DomainError(f"centerline reconstruction stopped: {traj.domain_stop}")
    phi = traj.evaluate(s_nodes)[0]
    states = solution.evaluate(s_nodes)
    u, _, r, _ = states
    if np.any(r <= 0):
        raise DomainError("radius r <= 0 along the solution")
    return Centerline(
        s=s_nodes,
        phi=phi,
        x=r * np.cos(phi),
        y=r * np.sin(phi),
        area=1.0 / u,
    )
