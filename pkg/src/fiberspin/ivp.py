"""Adaptive explicit initial-value integrator (Dormand-Prince 5(4)).

Used for the reduced inviscid system, the Lagrangian cross-check and the
centerline angle.  Provides continuous (dense) output per step, a
proportional-integral step-size controller and an optional fixed-step mode
for order-verification tests.

If the right-hand side raises :class:`DomainError` the integrator shrinks
the step toward the domain boundary and finally returns a *truncated*
trajectory with `domain_stop` set, so callers can distinguish "left the
physical domain" from a genuine singularity (:class:`StepUnderflow`).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, OutOfSpan, StepBudgetExceeded, StepUnderflow

# Dormand-Prince 5(4) tableau.  The fifth-order member advances; the
# embedded fourth-order member provides the error estimate (FSAL pair).
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = np.zeros((7, 7))
_A[1, 0] = 1 / 5
_A[2, :2] = [3 / 40, 9 / 40]
_A[3, :3] = [44 / 45, -56 / 15, 32 / 9]
_A[4, :4] = [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]
_A[5, :5] = [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]
_A[6, :6] = [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]
_B5 = _A[6].copy()
_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_E = _B5 - _B4
# Quartic dense-output weights (Hairer/Norsett/Wanner DOPRI5 interpolant).
_D = np.array(
    [
        -12715105075 / 11282082432,
        0.0,
        87487479700 / 32700410799,
        -10690763975 / 1880347072,
        701980252875 / 199316789632,
        -1453857185 / 822651844,
        69997945 / 29380423,
    ]
)

_EPS = np.finfo(float).eps
# The free quartic interpolant is roughly a digit less accurate than the
# advancing fifth-order solution; stepping against tightened tolerances keeps
# dense-output errors within a small multiple of the requested tolerance.
_CONTROL_TIGHTEN = 0.1


@dataclass(frozen=True)
class IvpConfig:
    """Integrator settings.

    fixed_step disables error control and takes uniform steps of that size
    (order-verification only); advance_low_order then propagates the embedded
    fourth-order member instead of the fifth-order one.
    """

    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_steps: int = 100_000
    initial_step: Optional[float] = None
    fixed_step: Optional[float] = None
    advance_low_order: bool = False

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


class Trajectory:
    """Piecewise-polynomial IVP solution with per-step dense output."""

    def __init__(self, ts: np.ndarray, ys: np.ndarray, rcont: np.ndarray,
                 domain_stop: Optional[str] = None):
        self.ts = ts              # (n+1,) strictly increasing node times
        self.ys = ys              # (n+1, dim) states at the nodes
        self._rcont = rcont       # (n, 5, dim) interpolation coefficients
        self.domain_stop = domain_stop

    @property
    def span(self) -> tuple[float, float]:
        return float(self.ts[0]), float(self.ts[-1])

    @property
    def end_state(self) -> np.ndarray:
        return self.ys[-1]

    def evaluate(self, s) -> np.ndarray:
        """Dense-output states at point(s) `s`; shape (dim,) or (dim, m)."""
        scalar = np.isscalar(s) or np.ndim(s) == 0
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        a, b = self.span
        slack = 4.0 * _EPS * max(abs(a), abs(b), 1.0)
        if np.any(s_arr < a - slack) or np.any(s_arr > b + slack):
            raise OutOfSpan(f"evaluation point outside [{a}, {b}]")
        s_arr = np.clip(s_arr, a, b)
        if len(self.ts) == 1:  # truncated before the first accepted step
            out = np.broadcast_to(self.ys[0], (len(s_arr), self.ys.shape[1]))
            return out[0] if scalar else out.T
        idx = np.clip(np.searchsorted(self.ts, s_arr, side="right") - 1, 0,
                      len(self.ts) - 2)
        h = self.ts[idx + 1] - self.ts[idx]
        theta = (s_arr - self.ts[idx]) / h
        c = self._rcont[idx]  # (m, 5, dim)
        t = theta[:, None]
        out = c[:, 0] + t * (c[:, 1] + (1 - t) * (c[:, 2] + t * (c[:, 3] + (1 - t) * c[:, 4])))
        # Nodes are reproduced exactly, bypassing interpolation round-off.
        exact = theta == 0.0
        if np.any(exact):
            out[exact] = self.ys[idx[exact]]
        exact_end = s_arr == self.ts[-1]
        if np.any(exact_end):
            out[exact_end] = self.ys[-1]
        return out[0] if scalar else out.T


def _error_norm(err, y0, y1, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def _initial_step(rhs, t0, y0, f0, direction, rtol, atol, span_len):
    scale = atol + rtol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span_len)
    try:
        f1 = rhs(t0 + direction * h0, y0 + direction * h0 * f0)
    except DomainError:
        return max(span_len * 1e-6, 1e-12)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, span_len)


def _rcont_coeffs(y0, y1, h, K):
    """Interpolation coefficients for one accepted step with stages K (7, dim)."""
    ydiff = y1 - y0
    bspl = h * K[0] - ydiff
    return np.stack([
        y0,
        ydiff,
        bspl,
        ydiff - h * K[6] - bspl,
        h * (_D @ K),
    ])


def integrate(rhs: Callable, initial: np.ndarray, span, config: IvpConfig = IvpConfig()) -> Trajectory:
    """Integrate y' = rhs(t, y) over span = (a, b), a < b.

    Returns a :class:`Trajectory`.  Raises :class:`StepBudgetExceeded` or
    :class:`StepUnderflow`; a DomainError from `rhs` truncates the
    trajectory instead (see module docstring).
    """
    a, b = float(span[0]), float(span[1])
    if not a < b:
        raise ValueError(f"need span a < b, got ({a}, {b})")
    y = np.asarray(initial, dtype=float).copy()
    t = a
    f = rhs(t, y)  # DomainError here propagates: rhs must be finite at start
    f = np.asarray(f, dtype=float)
    dim = y.size

    ts = [t]
    ys = [y.copy()]
    rconts = []
    domain_stop = None

    fixed = config.fixed_step is not None
    if fixed:
        n_fixed = max(1, int(np.ceil((b - a) / config.fixed_step - 1e-12)))
        h = (b - a) / n_fixed
    else:
        h = config.initial_step or _initial_step(
            rhs, t, y, f, 1.0, config.rel_tol, config.abs_tol, b - a)

    err_old = 1e-4
    just_rejected = False
    K = np.empty((7, dim))
    weights = _B4 if (fixed and config.advance_low_order) else _B5

    for _ in range(config.max_steps):
        if t >= b:
            break
        last = h >= b - t
        h = min(h, b - t)
        h_min = 16.0 * _EPS * max(abs(t), 1.0)

        try:
            K[0] = f
            for i in range(1, 7):
                K[i] = rhs(t + _C[i] * h, y + h * (_A[i, :i] @ K[:i]))
        except DomainError as exc:
            if fixed or h <= h_min:
                domain_stop = str(exc) or "rhs left the physical domain"
                break
            h = max(0.25 * h, h_min)
            continue

        y_new = y + h * (weights @ K)

        if not fixed:
            err = _error_norm(h * (_E @ K), y, y_new,
                              _CONTROL_TIGHTEN * config.rel_tol,
                              _CONTROL_TIGHTEN * config.abs_tol)
            if not np.isfinite(err):
                err = 2.0
            if err > 1.0:
                if h <= h_min:
                    raise StepUnderflow(f"step underflow at t={t:.6g}")
                fac = max(0.1, 0.9 / err**0.2)
                h = max(h * fac, h_min)
                just_rejected = True
                last = False
                continue
            # PI controller (beta = 0.04) for the next step size.
            err = max(err, 1e-10)
            fac = 0.9 * err**-0.17 * err_old**0.04
            if just_rejected:
                fac = min(fac, 1.0)
            h_next = h * min(5.0, max(0.2, fac))
            err_old = err
            just_rejected = False
        else:
            h_next = h

        rconts.append(_rcont_coeffs(y, y_new, h, K))
        t = b if last else t + h
        y = y_new
        if fixed and config.advance_low_order:
            f = np.asarray(rhs(t, y), dtype=float)  # FSAL stage matches y4, not y5
        else:
            f = K[6]
        ts.append(t)
        ys.append(y.copy())
        h = h_next
    else:
        raise StepBudgetExceeded(f"no convergence within {config.max_steps} steps")

    return Trajectory(np.array(ts), np.array(ys), np.array(rconts).reshape(-1, 5, dim),
                      domain_stop=domain_stop)


def evaluate(traj: Trajectory, s):
    """Dense-output evaluation; thin functional wrapper over Trajectory.evaluate."""
    return traj.evaluate(s)
