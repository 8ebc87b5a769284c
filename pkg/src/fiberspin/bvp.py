"""Two-point BVP solver: 4-stage Lobatto IIIA collocation with damped Newton.

The stationary viscous fiber system is discretized by polynomial collocation
at the four Lobatto points of every mesh interval (the implicit Runge-Kutta
form of the scheme), giving a C^1 piecewise-quartic solution that is
fifth-order accurate uniformly in the mesh width.  The nonlinear algebraic
system is solved by a damped Newton iteration with analytic Jacobians and a
banded direct linear solver; the mesh is refined where the interval residual
exceeds the requested tolerance.

Hard viscous cases are reached by continuation in delta starting from the
inviscid limit.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.linalg import solve_banded

from .errors import DomainError, GuessFailure
from .ivp import IvpConfig, integrate
from .model import SpinParams, inviscid_rhs, viscous_jacobian, viscous_rhs

_SQ5 = np.sqrt(5.0)
# Lobatto abscissae on [0, 1] and the classical IIIA tableau (order 6 at the
# nodes, uniform order 5 for the collocation polynomial).
LOBATTO_NODES = np.array([0.0, (5.0 - _SQ5) / 10.0, (5.0 + _SQ5) / 10.0, 1.0])
LOBATTO_A = np.array(
    [
        [0.0, 0.0, 0.0, 0.0],
        [(11 + _SQ5) / 120, (25 - _SQ5) / 120, (25 - 13 * _SQ5) / 120, (-1 + _SQ5) / 120],
        [(11 - _SQ5) / 120, (25 + 13 * _SQ5) / 120, (25 + _SQ5) / 120, (-1 - _SQ5) / 120],
        [1 / 12, 5 / 12, 5 / 12, 1 / 12],
    ]
)
LOBATTO_B = LOBATTO_A[3]


def _integrated_lagrange_basis() -> tuple[np.ndarray, np.ndarray]:
    """Monomial coefficients of the Lagrange basis at the Lobatto nodes.

    Returns (deriv_basis, int_basis): deriv_basis[j, m] are the theta^m
    coefficients of the cubic l_j with l_j(c_i) = delta_ij; int_basis[j, m]
    those of its antiderivative with value 0 at theta = 0.
    """
    V = np.vander(LOBATTO_NODES, 4, increasing=True)
    deriv = np.linalg.inv(V).T  # row j: coefficients of l_j
    integ = np.zeros((4, 5))
    integ[:, 1:] = deriv / np.arange(1, 5)
    return deriv, integ


_DERIV_BASIS, _INT_BASIS = _integrated_lagrange_basis()


def _basis_at(theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Values of the integrated and plain Lagrange basis at `theta` (m,) -> (m, 4)."""
    powers = np.power.outer(np.asarray(theta, dtype=float), np.arange(5))
    return powers @ _INT_BASIS.T, powers[:, :4] @ _DERIV_BASIS.T


@dataclass(frozen=True)
class CollocationSystem:
    """First-order system y' = rhs(s, y) with separated boundary conditions.

    bc(ya, yb) returns `dim` residuals whose first `n_left` rows depend only
    on ya and whose remaining rows depend only on yb.  rhs/jac must accept
    states stacked along the trailing axis.

    residual_weights(s, y) may supply per-component weights for the mesh
    error estimate, e.g. to measure the residual of an equation in its
    natural form c(y) y' = g(y) instead of y' = g(y)/c(y).  Weights must
    stay >= 1/50 so a converged solution still bounds the raw ODE residual
    by 50x the requested tolerance.
    """

    dim: int
    n_left: int
    rhs: Callable
    jac: Callable
    bc: Callable
    bc_jac: Callable  # -> (d bc / d ya, d bc / d yb), each (dim, dim)
    residual_weights: Optional[Callable] = None


class Outcome(enum.Enum):
    CONVERGED = "converged"
    NO_CONVERGENCE = "no_convergence"
    DOMAIN_EXIT = "domain_exit"

    def __str__(self):  # friendly for reports and CSV
        return self.value


@dataclass(frozen=True)
class Mesh:
    """Strictly increasing breakpoints spanning the solution interval.

    At least 4 intervals: coarser meshes cannot express the quartic
    collocation ansatz meaningfully and are always a configuration mistake.
    """

    breakpoints: np.ndarray

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        if len(bp) < 5 or np.any(np.diff(bp) <= 0):
            raise ValueError("need >= 4 strictly increasing mesh intervals")
        object.__setattr__(self, "breakpoints", bp)

    @property
    def intervals(self) -> int:
        return len(self.breakpoints) - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.breakpoints)


class MeshSolution:
    """C^1 piecewise-quartic collocation solution on a mesh.

    stage_values[k, i] and stage_derivs[k, i] hold the state and its
    derivative at Lobatto point i of interval k; the quartic on interval k is
    y_k + h * sum_j stage_derivs[k, j] * int_basis_j(theta).
    """

    def __init__(self, mesh: Mesh, stage_values: np.ndarray, stage_derivs: np.ndarray,
                 error_estimate: Optional[np.ndarray] = None,
                 newton_iterations: int = 0, converged: bool = False):
        self.mesh = mesh
        self.stage_values = stage_values
        self.stage_derivs = stage_derivs
        n = mesh.intervals
        self.error_estimate = (np.full(n, np.nan) if error_estimate is None
                               else np.asarray(error_estimate, dtype=float))
        self.newton_iterations = newton_iterations
        self.converged = converged

    @property
    def breakpoints(self) -> np.ndarray:
        return self.mesh.breakpoints

    @property
    def dim(self) -> int:
        return self.stage_values.shape[2]

    @property
    def node_values(self) -> np.ndarray:
        """States at the mesh breakpoints, shape (intervals + 1, dim)."""
        return np.vstack([self.stage_values[:, 0, :], self.stage_values[-1:, 3, :]])

    def _locate(self, s):
        scalar = np.isscalar(s) or np.ndim(s) == 0
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        bp = self.breakpoints
        slack = 4.0 * np.finfo(float).eps * max(abs(bp[0]), abs(bp[-1]), 1.0)
        if np.any(s_arr < bp[0] - slack) or np.any(s_arr > bp[-1] + slack):
            raise ValueError(f"evaluation point outside [{bp[0]}, {bp[-1]}]")
        s_arr = np.clip(s_arr, bp[0], bp[-1])
        idx = np.clip(np.searchsorted(bp, s_arr, side="right") - 1, 0, len(bp) - 2)
        h = bp[idx + 1] - bp[idx]
        theta = (s_arr - bp[idx]) / h
        return scalar, idx, h, theta

    def evaluate(self, s) -> np.ndarray:
        """Solution values at `s`; shape (dim,) for scalar input else (dim, m)."""
        scalar, idx, h, theta = self._locate(s)
        ib, _ = _basis_at(theta)  # (m, 4)
        out = self.stage_values[idx, 0, :] + h[:, None] * np.einsum(
            "mj,mjd->md", ib, self.stage_derivs[idx])
        return out[0] if scalar else out.T

    def derivative(self, s) -> np.ndarray:
        """First derivative of the collocation polynomial at `s`."""
        scalar, idx, h, theta = self._locate(s)
        _, db = _basis_at(theta)
        out = np.einsum("mj,mjd->md", db, self.stage_derivs[idx])
        return out[0] if scalar else out.T

    def second_derivative(self, s) -> np.ndarray:
        """Second derivative of the collocation polynomial at `s`."""
        scalar, idx, h, theta = self._locate(s)
        powers = np.power.outer(theta, np.arange(3))
        dbasis2 = (_DERIV_BASIS[:, 1:] * np.arange(1, 4)) @ powers.T  # (4, m)
        out = np.einsum("jm,mjd->md", dbasis2, self.stage_derivs[idx]) / h[:, None]
        return out[0] if scalar else out.T


@dataclass
class SolveReport:
    """Result of one (possibly continued) BVP solve."""

    outcome: Outcome
    reason: Optional[str] = None
    solution: Optional[MeshSolution] = None
    continuation_trace: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.outcome is Outcome.CONVERGED


# ---------------------------------------------------------------------------
# Nonlinear collocation equations
# ---------------------------------------------------------------------------

def _unpack_stages(x: np.ndarray, n: int, dim: int) -> np.ndarray:
    blocks = x.reshape(3 * n + 1, dim)
    stages = np.empty((n, 4, dim))
    stages[:, 0] = blocks[0:-1:3]
    stages[:, 1] = blocks[1::3]
    stages[:, 2] = blocks[2::3]
    stages[:, 3] = blocks[3::3]
    return stages


def _pack_stages(stages: np.ndarray) -> np.ndarray:
    n, _, dim = stages.shape
    blocks = np.empty((3 * n + 1, dim))
    blocks[0:-1:3] = stages[:, 0]
    blocks[1::3] = stages[:, 1]
    blocks[2::3] = stages[:, 2]
    blocks[-1] = stages[-1, 3]
    return blocks.ravel()


class _Discretization:
    """Residual/Jacobian assembly for one mesh (unknowns: nodes + 2 interior stages)."""

    def __init__(self, system: CollocationSystem, mesh: Mesh):
        if not 0 < system.n_left < system.dim:
            raise ValueError("boundary conditions must be separated: 0 < n_left < dim")
        self.system = system
        self.mesh = mesh
        self.n = mesh.intervals
        self.dim = system.dim
        self.h = mesh.widths
        # Arc-length positions of all four Lobatto points per interval.
        self.s_stages = mesh.breakpoints[:-1, None] + np.outer(self.h, LOBATTO_NODES)
        d, n = self.dim, self.n
        self.n_unknowns = (3 * n + 1) * d
        self.l_band = system.n_left + 3 * d - 1
        self.u_band = 4 * d - 1 - system.n_left
        self._row_idx, self._col_idx = self._block_indices()

    def _block_indices(self):
        """Global (row, col) indices of one interval's 3d x 4d Jacobian block."""
        d = self.dim
        rows = self.system.n_left + np.arange(3 * d)
        cols = np.arange(4 * d)
        return (np.repeat(rows, 4 * d).reshape(3 * d, 4 * d),
                np.tile(cols, (3 * d, 1)))

    def unpack(self, x: np.ndarray) -> np.ndarray:
        """Unknown vector -> stage values, shape (n, 4, dim)."""
        return _unpack_stages(x, self.n, self.dim)

    def stage_derivs(self, stages: np.ndarray) -> np.ndarray:
        """rhs at all stage points, shape (n, 4, dim); raises DomainError."""
        flat = stages.reshape(-1, self.dim).T  # (dim, n*4)
        f = self.system.rhs(self.s_stages.ravel(), flat)
        return np.asarray(f).T.reshape(self.n, 4, self.dim)

    def residual(self, x: np.ndarray) -> np.ndarray:
        d, n = self.dim, self.n
        stages = self.unpack(x)
        F = self.stage_derivs(stages)
        res = np.empty(self.n_unknowns)
        g = self.system.bc(stages[0, 0], stages[-1, 3])
        res[: self.system.n_left] = g[: self.system.n_left]
        res[-(d - self.system.n_left):] = g[self.system.n_left:]
        y0 = stages[:, 0, :]
        body = np.empty((n, 3, d))
        for i in (1, 2):
            body[:, i - 1] = (stages[:, i] - y0
                              - self.h[:, None] * np.einsum("j,njd->nd", LOBATTO_A[i], F))
        body[:, 2] = (stages[:, 3] - y0
                      - self.h[:, None] * np.einsum("j,njd->nd", LOBATTO_B, F))
        res[self.system.n_left: self.system.n_left + 3 * n * d] = body.reshape(-1)
        return res

    def jacobian_banded(self, x: np.ndarray) -> np.ndarray:
        """Banded (diagonal-ordered) Jacobian of :meth:`residual` at `x`."""
        d, n = self.dim, self.n
        stages = self.unpack(x)
        flat = stages.reshape(-1, d).T
        J = self.system.jac(self.s_stages.ravel(), flat)  # (d, d, n*4)
        J = np.moveaxis(np.asarray(J), -1, 0).reshape(n, 4, d, d)

        eye = np.eye(d)
        blocks = np.zeros((n, 3 * d, 4 * d))
        for i_loc, (row_i, a_row) in enumerate(
                [(1, LOBATTO_A[1]), (2, LOBATTO_A[2]), (3, LOBATTO_B)]):
            rs = slice(i_loc * d, (i_loc + 1) * d)
            for j in range(4):
                cs = slice(j * d, (j + 1) * d)
                block = -self.h[:, None, None] * a_row[j] * J[:, j]
                if j == 0:
                    block = block - eye
                if j == row_i:
                    block = block + eye
                blocks[:, rs, cs] = block

        ab = np.zeros((self.l_band + self.u_band + 1, self.n_unknowns))
        rows = self._row_idx[None] + 3 * d * np.arange(n)[:, None, None]
        cols = self._col_idx[None] + 3 * d * np.arange(n)[:, None, None]
        ab[self.u_band + rows - cols, cols] = blocks

        ga, gb = self.system.bc_jac(stages[0, 0], stages[-1, 3])
        ga = np.asarray(ga)
        gb = np.asarray(gb)
        nl = self.system.n_left
        for i in range(nl):
            for j in range(d):
                ab[self.u_band + i - j, j] += ga[i, j]
        base = self.n_unknowns - d
        for i in range(d - nl):
            row = self.n_unknowns - (d - nl) + i
            for j in range(d):
                col = base + j
                ab[self.u_band + row - col, col] += gb[nl + i, j]
        return ab

    def interval_residual_norms(self, solution: MeshSolution,
                                thetas=(0.13, 0.5, 0.87)) -> np.ndarray:
        """Max weighted ODE residual ||P' - rhs(P)|| per interval.

        Sampled at off-collocation points near the extrema of the residual
        lobes; intervals whose sample states leave the physical domain get an
        infinite estimate (they must be refined or the solve must fail).
        """
        n, d = self.n, self.dim
        est = np.zeros(n)
        ib, db = _basis_at(np.asarray(thetas))
        for m, theta in enumerate(thetas):
            s = self.mesh.breakpoints[:-1] + theta * self.h
            vals = (solution.stage_values[:, 0, :]
                    + self.h[:, None] * np.einsum("j,njd->nd", ib[m], solution.stage_derivs))
            derivs = np.einsum("j,njd->nd", db[m], solution.stage_derivs)
            try:
                res = np.abs(derivs - np.asarray(self.system.rhs(s, vals.T)).T)
                if self.system.residual_weights is not None:
                    res = res * np.asarray(self.system.residual_weights(s, vals.T)).T
                sample = np.max(res, axis=1)
            except DomainError:
                # Localize the offending intervals one by one.
                sample = np.empty(n)
                for k in range(n):
                    try:
                        r = np.abs(derivs[k] - np.asarray(
                            self.system.rhs(s[k], vals[k])))
                        if self.system.residual_weights is not None:
                            r = r * np.asarray(
                                self.system.residual_weights(s[k], vals[k]))
                        sample[k] = np.max(r)
                    except DomainError:
                        sample[k] = np.inf
            est = np.maximum(est, sample)
        return est


@dataclass
class _NewtonResult:
    ok: bool
    x: np.ndarray
    iterations: int
    reason: Optional[str] = None
    domain_exit: bool = False


def _newton(disc: _Discretization, x0: np.ndarray, tol: float,
            max_iter: int = 50) -> _NewtonResult:
    """Damped Newton (step-halving line search on the residual norm)."""
    target = 0.01 * tol
    x = x0.copy()
    try:
        res = disc.residual(x)
    except DomainError as exc:
        return _NewtonResult(False, x, 0, f"initial guess outside domain: {exc}",
                             domain_exit=True)
    norm = np.max(np.abs(res))

    for it in range(1, max_iter + 1):
        if norm <= target:
            return _NewtonResult(True, x, it - 1)
        try:
            ab = disc.jacobian_banded(x)
            dx = solve_banded((disc.l_band, disc.u_band), ab, -res)
        except (np.linalg.LinAlgError, ValueError):
            dx = None
        if dx is None or not np.all(np.isfinite(dx)):
            if norm <= tol:
                return _NewtonResult(True, x, it)
            return _NewtonResult(False, x, it, "singular collocation Jacobian")

        accepted = False
        all_domain = True
        for lam in 2.0 ** -np.arange(11):
            try:
                res_new = disc.residual(x + lam * dx)
            except DomainError:
                continue
            all_domain = False
            norm_new = np.max(np.abs(res_new))
            if norm_new < norm:
                x = x + lam * dx
                res, norm = res_new, norm_new
                accepted = True
                break
        if not accepted:
            if norm <= tol:
                return _NewtonResult(True, x, it)
            if all_domain:
                return _NewtonResult(False, x, it,
                                     "every damped step leaves the physical domain",
                                     domain_exit=True)
            return _NewtonResult(False, x, it, "line search stalled")

    if norm <= tol:
        return _NewtonResult(True, x, max_iter)
    return _NewtonResult(False, x, max_iter, "Newton iteration budget exhausted")


def _solution_from_x(disc: _Discretization, x: np.ndarray,
                     newton_iterations: int, converged: bool) -> MeshSolution:
    stages = disc.unpack(x)
    derivs = disc.stage_derivs(stages)
    sol = MeshSolution(disc.mesh, stages, derivs,
                       newton_iterations=newton_iterations, converged=converged)
    sol.error_estimate = disc.interval_residual_norms(sol)
    return sol


def _sample_guess(guess, mesh: Mesh, dim: int) -> np.ndarray:
    """Initial unknown vector from a MeshSolution or a callable s -> y."""
    s = (mesh.breakpoints[:-1, None] + np.outer(mesh.widths, LOBATTO_NODES)).ravel()
    if isinstance(guess, MeshSolution):
        vals = guess.evaluate(s).T  # (m, dim)
    else:
        vals = np.asarray([np.asarray(guess(si), dtype=float) for si in s])
    stages = vals.reshape(mesh.intervals, 4, dim)
    # Shared breakpoints must coincide exactly for pack() consistency.
    stages[1:, 0, :] = stages[:-1, 3, :]
    return _pack_stages(stages)


def _coarsen_mesh(solution: MeshSolution, tol: float) -> Mesh:
    """Merge adjacent interval pairs that over-resolve the residual tolerance.

    The residual scales like h^4, so merging two intervals with estimates
    below tol/64 keeps the merged estimate safely below tol.  Used between
    continuation steps to stop boundary-layer meshes from accumulating.
    """
    bp = solution.breakpoints
    est = solution.error_estimate
    cutoff = tol / 64.0
    keep = [bp[0]]
    k = 0
    n = len(est)
    merges_allowed = n - 4
    while k < n:
        if (merges_allowed > 0 and k + 1 < n
                and est[k] < cutoff and est[k + 1] < cutoff):
            keep.append(bp[k + 2])
            merges_allowed -= 1
            k += 2
        else:
            keep.append(bp[k + 1])
            k += 1
    return Mesh(np.array(keep))


def _refine_mesh(mesh: Mesh, est: np.ndarray, tol: float) -> Mesh:
    """Split every interval whose residual estimate exceeds tol."""
    bp = mesh.breakpoints
    new_bp = [bp[0]]
    for k in range(mesh.intervals):
        left, right = bp[k], bp[k + 1]
        if not np.isfinite(est[k]) or est[k] > 100.0 * tol:
            pieces = 3
        elif est[k] > tol:
            pieces = 2
        else:
            pieces = 1
        for i in range(1, pieces):
            new_bp.append(left + (right - left) * i / pieces)
        new_bp.append(right)
    return Mesh(np.array(new_bp))


def solve_bvp(system: CollocationSystem,
              guess: Union[MeshSolution, Callable],
              tol: float = 1e-8,
              *,
              span: Optional[tuple] = None,
              mesh: Optional[Mesh] = None,
              initial_intervals: int = 32,
              adapt: bool = True,
              max_nodes: int = 10_000,
              newton_budget: int = 50,
              max_refinements: int = 25) -> SolveReport:
    """Solve the two-point BVP by Lobatto IIIA collocation on an adaptive mesh.

    `guess` is a MeshSolution (its mesh is reused unless `mesh` overrides
    it) or a callable s -> y (then `span` is required and an initial uniform
    mesh is built).  With adapt=False the mesh is kept fixed and `converged`
    only certifies the Newton iteration, not the residual estimate
    (order-study mode).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if mesh is None:
        if isinstance(guess, MeshSolution):
            mesh = guess.mesh
        else:
            if span is None:
                raise ValueError("span is required for a callable guess")
            mesh = Mesh(np.linspace(span[0], span[1], initial_intervals + 1))

    x = _sample_guess(guess, mesh, system.dim)
    total_newton = 0

    for _ in range(max_refinements):
        disc = _Discretization(system, mesh)
        result = _newton(disc, x, tol, max_iter=newton_budget)
        total_newton += result.iterations
        if not result.ok:
            outcome = Outcome.DOMAIN_EXIT if result.domain_exit else Outcome.NO_CONVERGENCE
            return SolveReport(outcome, reason=result.reason)

        solution = _solution_from_x(disc, result.x, total_newton, converged=True)
        est = solution.error_estimate
        if not adapt or np.max(est) <= tol:
            return SolveReport(Outcome.CONVERGED, solution=solution)

        new_mesh = _refine_mesh(mesh, est, tol)
        if new_mesh.intervals + 1 > max_nodes:
            return SolveReport(Outcome.NO_CONVERGENCE,
                               reason=f"mesh refinement exceeded {max_nodes} nodes")
        x = _sample_guess(solution, new_mesh, system.dim)
        mesh = new_mesh

    return SolveReport(Outcome.NO_CONVERGENCE,
                       reason=f"no residual convergence in {max_refinements} refinement rounds")


# ---------------------------------------------------------------------------
# Fiber-specific systems and continuation
# ---------------------------------------------------------------------------

def viscous_system(params: SpinParams) -> CollocationSystem:
    """Collocation description of the stationary viscous fiber BVP.

    The mesh error estimate weighs each equation in its natural form
    (delta*u' = ..., eps^2*u*q' = ..., r' = ..., q*beta' = ...), with weights
    floored at 1/50 so the plain residual y' - rhs(y) of a converged
    solution never exceeds 50x the tolerance.
    """
    kappa = params.kappa
    eps2 = params.epsilon**2
    w_floor = 0.02

    def rhs(s, y):
        return viscous_rhs(y, params)

    def jac(s, y):
        return viscous_jacobian(y, params)

    def weights(s, y):
        u, q = y[0], y[1]
        return np.stack([
            np.full_like(u, max(params.delta, w_floor)),
            np.maximum(eps2 * u, w_floor),
            np.ones_like(u),
            np.maximum(np.abs(q), w_floor),
        ])

    def bc(ya, yb):
        if yb[0] <= 0:
            raise DomainError("end speed u(L) <= 0")
        return np.array([
            ya[0] - 1.0,
            ya[2] - 1.0,
            ya[3],
            yb[1] - yb[0] + 2.0 * kappa / np.sqrt(yb[0]),
        ])

    def bc_jac(ya, yb):
        ga = np.zeros((4, 4))
        gb = np.zeros((4, 4))
        ga[0, 0] = 1.0
        ga[1, 2] = 1.0
        ga[2, 3] = 1.0
        gb[3, 0] = -1.0 - kappa * yb[0] ** -1.5
        gb[3, 1] = 1.0
        return ga, gb

    return CollocationSystem(dim=4, n_left=3, rhs=rhs, jac=jac, bc=bc,
                             bc_jac=bc_jac, residual_weights=weights)


def inviscid_guess(params: SpinParams, intervals: int = 32,
                   ivp_tol: float = 1e-12) -> MeshSolution:
    """Starting guess from the inviscid limit delta = 0.

    Integrates the reduced (v, r, beta) system on [0, L], converts back to
    Euler variables via u = v/epsilon and q = u - kappa/sqrt(u), and samples
    onto a uniform mesh.  The stored polynomial interpolates the sampled
    values (cubic per interval), so mesh-node states reproduce the inviscid
    identity exactly.
    """
    L = params.length
    y0 = np.array([params.epsilon, 1.0, 0.0])
    traj = integrate(lambda s, y: inviscid_rhs(y, params), y0, (0.0, L),
                     IvpConfig(rel_tol=ivp_tol, abs_tol=ivp_tol * 1e-2))
    if traj.domain_stop is not None or traj.span[1] < L:
        raise GuessFailure(
            f"inviscid trajectory left its domain at s={traj.span[1]:.6g} < L={L:g}"
            + (f" ({traj.domain_stop})" if traj.domain_stop else ""))

    mesh = Mesh(np.linspace(0.0, L, intervals + 1))
    s = (mesh.breakpoints[:-1, None] + np.outer(mesh.widths, LOBATTO_NODES)).ravel()
    v, r, beta = traj.evaluate(s)
    u = v / params.epsilon
    q = u - params.kappa / np.sqrt(u)
    stages = np.stack([u, q, r, beta], axis=1).reshape(intervals, 4, 4)
    stages[1:, 0, :] = stages[:-1, 3, :]

    # Derivative data = derivative of the value-interpolating cubic, so the
    # integrated-quartic representation reproduces the samples exactly.
    dmat = _value_cubic_deriv_matrix()
    derivs = np.einsum("mi,kid->kmd", dmat, stages) / mesh.widths[:, None, None]
    return MeshSolution(mesh, stages, derivs, converged=False)


def _value_cubic_deriv_matrix() -> np.ndarray:
    """Differentiation matrix of the value-cubic at the Lobatto nodes (4x4).

    Row m maps the four nodal values to the cubic's derivative at node m
    (in the unit theta coordinate).
    """
    powers = np.power.outer(LOBATTO_NODES, np.arange(3))
    dl = (_DERIV_BASIS[:, 1:] * np.arange(1, 4)) @ powers.T  # (4 basis, 4 nodes)
    return dl.T


@dataclass(frozen=True)
class ContinuationSettings:
    """Defaults for the delta-continuation ladder.

    Intermediate climb solves only produce guesses, so they run at the looser
    climb_tol; the attempt at the target delta always uses the requested
    tolerance.  Set climb_tol=None to climb at full tolerance.
    """

    delta_start: float = 1e-3
    growth: float = 2.0
    step_min_rel: float = 1e-6  # declare failure once d-step < rel * delta_target
    guess_intervals: int = 32
    climb_tol: Optional[float] = 1e-4


def continuation_solve(params: SpinParams, tol: float = 1e-8,
                       settings: ContinuationSettings = ContinuationSettings(),
                       **solve_kwargs) -> SolveReport:
    """Solve the viscous BVP at params.delta, continuing in delta if needed.

    First attempts a direct solve from the inviscid guess.  On failure a
    geometric ladder in delta is climbed from min(delta, delta_start),
    re-using each converged solution as the next guess and halving the delta
    step after each failed attempt; the full sequence is recorded in the
    report's continuation_trace.
    """
    if params.delta <= 0:
        raise ValueError("continuation_solve requires delta > 0")
    trace: list[tuple[float, str]] = []
    target = params.delta
    climb_tol = tol if settings.climb_tol is None else max(tol, settings.climb_tol)

    def attempt(delta: float, guess, tol_used: float) -> SolveReport:
        p = SpinParams(delta, params.epsilon, params.kappa, params.length)
        mesh = None
        if isinstance(guess, MeshSolution) and np.all(np.isfinite(guess.error_estimate)):
            mesh = _coarsen_mesh(guess, tol_used)
        report = solve_bvp(viscous_system(p), guess, tol_used, mesh=mesh, **solve_kwargs)
        trace.append((delta, str(report.outcome)))
        return report

    try:
        guess0 = inviscid_guess(params, intervals=settings.guess_intervals)
    except GuessFailure as exc:
        return SolveReport(Outcome.DOMAIN_EXIT, reason=str(exc),
                           continuation_trace=trace)

    direct = attempt(target, guess0, tol)
    if direct.converged or target <= settings.delta_start:
        direct.continuation_trace = trace
        return direct

    step_min = settings.step_min_rel * target
    delta_cur = 0.0
    guess = guess0
    step = min(target, settings.delta_start)
    last_reason = direct.reason

    while True:
        delta_try = min(target, delta_cur + step)
        at_target = delta_try == target
        report = attempt(delta_try, guess, tol if at_target else climb_tol)
        if report.converged:
            if at_target:
                report.continuation_trace = trace
                return report
            delta_cur = delta_try
            guess = report.solution
            step *= settings.growth
        else:
            last_reason = report.reason
            step = 0.5 * (delta_try - delta_cur)
            if step <= step_min:
                return SolveReport(
                    Outcome.NO_CONVERGENCE,
                    reason=(f"continuation stalled at delta={delta_cur:.6g} "
                            f"(step below minimum {step_min:.3g}); last failure: "
                            + (last_reason or "unknown")),
                    continuation_trace=trace)
