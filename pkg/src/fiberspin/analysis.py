"""Closed-form existence results and classification of computed solutions.

Implements the analytic apparatus around the stationary fiber equations:
initial curvature formulas for the speed in both frames, the two-sided
bounds on the initial internal energy q0, and the non-existence criterion
p(kappa) <= delta/epsilon^2.  `classify` checks a solved profile against the
three defining properties of a physically relevant stationary solution:

    P1: q0 in (0, 1 - kappa]
    P2: u''(0) < 0          (Euler frame, concave at the nozzle)
    P3: d2u_L/dt2(0) > 0    (Lagrangian frame, convex at the nozzle)
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NotConverged, PreconditionError
from .model import SpinParams


class Existence(enum.Enum):
    MAY_EXIST = "may_exist"
    CANNOT_EXIST = "cannot_exist"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class Q0Bounds:
    """Two-sided bounds on q0 for a physically relevant solution.

    `lower`/`upper` are the raw bounds clamped to [0, ...] and [..., 1].
    An empty interval (lower > upper) signals non-existence; it is not an
    error state.
    """

    lower_raw: float
    upper_raw: float
    lower: float
    upper: float

    @property
    def empty(self) -> bool:
        return self.lower > self.upper

    def contains(self, q0: float) -> bool:
        return self.lower <= q0 <= self.upper


@dataclass(frozen=True)
class CriterionResult:
    """Non-existence check: CannotExist iff delta/epsilon^2 >= p(kappa)."""

    p_kappa: float
    ratio: float
    verdict: Existence


@dataclass(frozen=True)
class ClassificationReport:
    """P1-P3 verdicts and bound containment for one converged solution.

    p1 is evaluated directly from q0; p1_equiv uses the equivalent boundary
    signs u'(0) >= 0 and beta'(0) < 0 computed from the solved profile (the
    two must agree).  u_dd0_numeric is the second derivative of the
    collocation polynomial at s=0, reported for diagnosis only; verdicts use
    the analytic forms.
    """

    q0: float
    p1: bool
    p1_equiv: bool
    p2: bool
    p3: bool
    u_dd0_analytic: float
    uL_dd0_analytic: float
    u_dd0_numeric: float
    bounds: Q0Bounds
    in_bounds: bool
    existence: Existence

    @property
    def physically_relevant(self) -> bool:
        return self.p1 and self.p2 and self.p3

    @property
    def cannot_exist_by_bounds(self) -> bool:
        return self.bounds.empty


def u_dd0_inviscid(epsilon: float, kappa: float) -> float:
    """Initial speed curvature u''(0) of the inviscid fiber.

    Valid (and provably negative) for 0 < epsilon < sqrt(1 - kappa/4)/(1 + kappa/2).
    """
    if not 0 <= kappa < 1:
        raise PreconditionError(f"kappa must lie in [0, 1), got {kappa}")
    eps_max = np.sqrt(1.0 - kappa / 4.0) / (1.0 + kappa / 2.0)
    if not 0 < epsilon < eps_max:
        raise PreconditionError(
            f"epsilon={epsilon} outside (0, {eps_max:.6g}) where the formula holds")
    c = 1.0 + kappa / 2.0
    return (epsilon**2 * c**2 + kappa / 4.0 - 1.0) / (epsilon**4 * c**3)


def u_dd0_viscous(q0: float, params: SpinParams) -> float:
    """u''(0) of the viscous fiber from the differentiated speed equation:

        delta^2 u''(0) = (2 - kappa/2 - q0) (1 - kappa - q0) - delta/eps^2
    """
    if params.delta <= 0:
        raise PreconditionError("u_dd0_viscous requires delta > 0")
    k = params.kappa
    mu = (2.0 - k / 2.0 - q0) * (1.0 - k - q0) - params.ratio
    return mu / params.delta**2


def uL_dd0_viscous(q0: float, params: SpinParams) -> float:
    """Initial Lagrangian acceleration rate:

        delta^2 d2u_L/dt2(0) = (1 - kappa - q0) (3 - 3 kappa/2 - 2 q0) - delta/eps^2

    Identically equal to u''(0) u(0)^2 + u'(0)^2 u(0) with u(0) = 1 and
    u'(0) = (1 - kappa - q0)/delta.
    """
    if params.delta <= 0:
        raise PreconditionError("uL_dd0_viscous requires delta > 0")
    k = params.kappa
    lam = (1.0 - k - q0) * (3.0 - 1.5 * k - 2.0 * q0) - params.ratio
    return lam / params.delta**2


def q0_bounds(params: SpinParams) -> Q0Bounds:
    """Theorem-type two-sided bounds max(0, lo) <= q0 <= min(1, hi) with

        lo = (3 - 3k/2 - sqrt((1 + k/2)^2 + 4 delta/eps^2)) / 2
        hi = (5 - 7k/2 - sqrt((1 + k/2)^2 + 8 delta/eps^2)) / 4
    """
    k = params.kappa
    ratio = params.ratio
    a = (1.0 + k / 2.0) ** 2
    lower_raw = (3.0 - 1.5 * k - np.sqrt(a + 4.0 * ratio)) / 2.0
    upper_raw = (5.0 - 3.5 * k - np.sqrt(a + 8.0 * ratio)) / 4.0
    return Q0Bounds(lower_raw=lower_raw, upper_raw=upper_raw,
                    lower=max(0.0, lower_raw), upper=min(1.0, upper_raw))


def p_kappa(kappa: float) -> float:
    """Critical regime curve p(kappa) = 3 (1 - 3 kappa/2 + kappa^2/2)."""
    return 3.0 * (1.0 - 1.5 * kappa + 0.5 * kappa**2)


def existence_criterion(params: SpinParams) -> CriterionResult:
    """Non-existence criterion: CannotExist iff delta/eps^2 >= p(kappa)."""
    p = p_kappa(params.kappa)
    ratio = params.ratio
    verdict = Existence.CANNOT_EXIST if ratio >= p else Existence.MAY_EXIST
    return CriterionResult(p_kappa=p, ratio=ratio, verdict=verdict)


def classify(solution, params: SpinParams,
             fd_step: float = 1e-4) -> ClassificationReport:
    """Classify a converged viscous solution against P1-P3 and the q0 bounds.

    P1 is computed twice: directly from q0 and via the boundary-sign
    equivalence u'(0) >= 0 and beta'(0) < 0 evaluated on the solved profile.
    u''(0) is reported both analytically and by one-sided second differencing
    of the collocation polynomial (step `fd_step`).
    """
    if not getattr(solution, "converged", False):
        raise NotConverged("classification requires a converged solution")

    left = solution.node_values[0]
    q0 = float(left[1])

    from .model import viscous_rhs  # local import to keep module load light

    f0 = viscous_rhs(left, params)
    p1_direct = 0.0 < q0 <= 1.0 - params.kappa
    p1_equiv = (f0[0] >= 0.0) and (f0[3] < 0.0)

    u_dd0 = u_dd0_viscous(q0, params)
    uL_dd0 = uL_dd0_viscous(q0, params)

    # One-sided 2nd-order difference of u on the collocation polynomial.
    h = min(fd_step, float(solution.breakpoints[-1] - solution.breakpoints[0]) / 16.0)
    s0 = float(solution.breakpoints[0])
    u_vals = solution.evaluate(s0 + h * np.arange(4.0))[0]
    u_dd0_num = float((2.0 * u_vals[0] - 5.0 * u_vals[1] + 4.0 * u_vals[2]
                       - u_vals[3]) / h**2)

    bounds = q0_bounds(params)
    return ClassificationReport(
        q0=q0,
        p1=p1_direct,
        p1_equiv=p1_equiv,
        p2=u_dd0 < 0.0,
        p3=uL_dd0 > 0.0,
        u_dd0_analytic=u_dd0,
        uL_dd0_analytic=uL_dd0,
        u_dd0_numeric=u_dd0_num,
        bounds=bounds,
        in_bounds=bounds.contains(q0),
        existence=existence_criterion(params).verdict,
    )
