"""Parameter-grid studies, convergence-boundary search and result export."""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .analysis import ClassificationReport, Q0Bounds, classify, existence_criterion, p_kappa
from .bvp import ContinuationSettings, Outcome, continuation_solve
from .errors import NoBracket, ParameterError
from .model import SpinParams

CSV_COLUMNS = [
    "delta", "epsilon", "kappa", "length", "ratio", "p_kappa", "outcome",
    "q0", "q0_lower", "q0_upper", "u_dd0_analytic", "u_dd0_numeric",
    "uL_dd0_analytic", "p1", "p2", "p3", "in_bounds", "wall_time",
]


@dataclass(frozen=True)
class SweepPlan:
    """Cartesian parameter grid; iteration order is delta x epsilon x kappa."""

    delta_values: Sequence[float]
    epsilon_values: Sequence[float]
    kappa_values: Sequence[float]
    length: float = 1.0
    tol: float = 1e-8
    jobs: int = 1
    continuation: ContinuationSettings = ContinuationSettings()

    def __post_init__(self):
        # Empty axes are allowed: an empty plan runs zero points and exports
        # header-only files.
        for name in ("delta_values", "epsilon_values", "kappa_values"):
            vals = tuple(float(v) for v in getattr(self, name))
            object.__setattr__(self, name, vals)
        if self.jobs < 1:
            raise ParameterError("jobs must be >= 1")

    def points(self) -> list[SpinParams]:
        return [
            SpinParams(d, e, k, self.length)
            for d in self.delta_values
            for e in self.epsilon_values
            for k in self.kappa_values
        ]


@dataclass
class SweepRecord:
    """One grid point: parameters, solver outcome and classification.

    wall_time is excluded from equality; it is diagnostic only and the
    record lists produced by sequential and parallel sweeps must compare
    equal.
    """

    params: SpinParams
    outcome: Outcome
    reason: Optional[str]
    q0: Optional[float]
    classification: Optional[ClassificationReport]
    ratio: float
    p_kappa: float
    wall_time: float = field(compare=False, default=0.0)


@dataclass(frozen=True)
class BoundaryResult:
    """Bracket [delta_lo, delta_hi] around the empirical convergence boundary."""

    epsilon: float
    kappa: float
    length: float
    delta_lo: float
    delta_hi: float
    ratio_lo: float
    ratio_hi: float
    p_kappa: float

    @property
    def relative_gap(self) -> float:
        """Nonnegative when the empirical boundary lies below the analytic bound."""
        return (self.p_kappa - self.ratio_hi) / self.p_kappa


def _solve_point(args) -> SweepRecord:
    params, tol, settings = args
    crit = existence_criterion(params)
    start = time.perf_counter()
    report = continuation_solve(params, tol, settings=settings)
    if report.converged:
        cls = classify(report.solution, params)
        q0 = cls.q0
    else:
        cls = None
        q0 = None
    wall = time.perf_counter() - start
    return SweepRecord(params=params, outcome=report.outcome, reason=report.reason,
                       q0=q0, classification=cls, ratio=crit.ratio,
                       p_kappa=crit.p_kappa, wall_time=wall)


def iter_sweep(plan: SweepPlan):
    """Yield sweep records in grid order as they become available."""
    tasks = [(p, plan.tol, plan.continuation) for p in plan.points()]
    if plan.jobs == 1 or len(tasks) <= 1:
        for t in tasks:
            yield _solve_point(t)
        return
    with ProcessPoolExecutor(max_workers=plan.jobs) as pool:
        yield from pool.map(_solve_point, tasks, chunksize=1)


def run_sweep(plan: SweepPlan) -> list[SweepRecord]:
    """Solve and classify every grid point of `plan`.

    Individual failures are recorded as outcomes, never raised.  Output
    order equals grid iteration order regardless of the worker count, and
    the scientific payload is identical for any `jobs` value.
    """
    return list(iter_sweep(plan))


def find_boundary(epsilon: float, kappa: float, length: float = 1.0,
                  resolution: float = 1e-3, tol: float = 1e-8,
                  settings: ContinuationSettings = ContinuationSettings(
                      step_min_rel=1e-2),
                  scan_start: Optional[float] = None,
                  scan_max: Optional[float] = None) -> BoundaryResult:
    """Bracket the largest delta where the BVP still converges, for fixed
    (epsilon, kappa, length).

    A geometric scan (factor 2) from `scan_start` locates a sign change of
    the convergence predicate; the upper end is only accepted after three
    consecutive failures, guarding against non-monotone pockets.  Bisection
    then narrows the bracket to `resolution`.
    """
    p_k = p_kappa(kappa)
    scale = epsilon**2 * p_k
    if resolution <= 0:
        raise ParameterError("resolution must be positive")
    if resolution >= scale / 4.0:
        raise ParameterError(
            f"resolution {resolution:g} is coarser than the scan step "
            f"{scale / 4.0:g} for epsilon={epsilon}, kappa={kappa}")
    lo = scan_start if scan_start is not None else scale / 64.0
    hi_max = scan_max if scan_max is not None else 4.0 * scale

    def converges(delta: float) -> bool:
        params = SpinParams(delta, epsilon, kappa, length)
        return continuation_solve(params, tol, settings=settings).converged

    if not converges(lo):
        raise NoBracket(f"smallest scanned delta {lo:g} already fails")

    delta_lo = lo
    delta_hi = None
    fails = 0
    d = lo
    while d < hi_max:
        d *= 2.0
        if converges(d):
            delta_lo = d
            delta_hi = None
            fails = 0
        else:
            if delta_hi is None:
                delta_hi = d
            fails += 1
            if fails >= 3:
                break
    if delta_hi is None or fails < 3:
        raise NoBracket(f"largest scanned delta {d:g} still converges")

    while delta_hi - delta_lo > resolution:
        mid = 0.5 * (delta_lo + delta_hi)
        if converges(mid):
            delta_lo = mid
        else:
            delta_hi = mid

    eps2 = epsilon**2
    return BoundaryResult(epsilon=epsilon, kappa=kappa, length=length,
                          delta_lo=delta_lo, delta_hi=delta_hi,
                          ratio_lo=delta_lo / eps2, ratio_hi=delta_hi / eps2,
                          p_kappa=p_k)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def record_row(rec: SweepRecord, include_wall_time: bool = True) -> list[str]:
    """CSV cells of one record, in CSV_COLUMNS order."""
    c = rec.classification
    cells = [
        _fmt(rec.params.delta), _fmt(rec.params.epsilon), _fmt(rec.params.kappa),
        _fmt(rec.params.length), _fmt(rec.ratio), _fmt(rec.p_kappa),
        str(rec.outcome), _fmt(rec.q0),
        _fmt(c.bounds.lower if c else None), _fmt(c.bounds.upper if c else None),
        _fmt(c.u_dd0_analytic if c else None), _fmt(c.u_dd0_numeric if c else None),
        _fmt(c.uL_dd0_analytic if c else None),
        _fmt(c.p1 if c else None), _fmt(c.p2 if c else None),
        _fmt(c.p3 if c else None), _fmt(c.in_bounds if c else None),
    ]
    if include_wall_time:
        cells.append(_fmt(rec.wall_time))
    return cells


def record_dict(rec: SweepRecord, include_wall_time: bool = True) -> dict:
    """JSON-ready mirror of one record."""
    c = rec.classification
    out = {
        "delta": rec.params.delta,
        "epsilon": rec.params.epsilon,
        "kappa": rec.params.kappa,
        "length": rec.params.length,
        "ratio": rec.ratio,
        "p_kappa": rec.p_kappa,
        "outcome": str(rec.outcome),
        "reason": rec.reason,
        "q0": rec.q0,
        "classification": None,
    }
    if c is not None:
        out["classification"] = {
            "q0": c.q0,
            "p1": c.p1,
            "p1_equiv": c.p1_equiv,
            "p2": c.p2,
            "p3": c.p3,
            "u_dd0_analytic": c.u_dd0_analytic,
            "uL_dd0_analytic": c.uL_dd0_analytic,
            "u_dd0_numeric": c.u_dd0_numeric,
            "bounds": {
                "lower_raw": c.bounds.lower_raw,
                "upper_raw": c.bounds.upper_raw,
                "lower": c.bounds.lower,
                "upper": c.bounds.upper,
            },
            "in_bounds": c.in_bounds,
            "existence": str(c.existence),
        }
    if include_wall_time:
        out["wall_time"] = rec.wall_time
    return out


def export(records: Sequence[SweepRecord], format: str, path,
           include_wall_time: bool = True) -> None:
    """Write records as CSV or JSON.

    Floats are rendered with 17 significant digits (round-trippable).  The
    wall_time column can be omitted so that repeated runs of a deterministic
    sweep produce byte-identical files.
    """
    fmt = format.lower()
    if fmt == "csv":
        columns = CSV_COLUMNS if include_wall_time else CSV_COLUMNS[:-1]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(columns)
            for rec in records:
                writer.writerow(record_row(rec, include_wall_time))
    elif fmt == "json":
        with open(path, "w") as fh:
            json.dump([record_dict(r, include_wall_time) for r in records],
                      fh, indent=1)
            fh.write("\n")
    else:
        raise ValueError(f"unknown export format {format!r}")


_FLOAT_COLUMNS = {"delta", "epsilon", "kappa", "length", "ratio", "p_kappa",
                  "q0", "q0_lower", "q0_upper", "u_dd0_analytic",
                  "u_dd0_numeric", "uL_dd0_analytic", "wall_time"}
_BOOL_COLUMNS = {"p1", "p2", "p3", "in_bounds"}


def read_csv(path) -> list[dict]:
    """Parse an exported CSV back into typed dictionaries (None for blanks)."""
    rows = []
    with open(path, newline="") as fh:
        for raw in csv.DictReader(fh):
            row = {}
            for key, cell in raw.items():
                if cell == "":
                    row[key] = None
                elif key in _FLOAT_COLUMNS:
                    row[key] = float(cell)
                elif key in _BOOL_COLUMNS:
                    row[key] = cell == "true"
                else:
                    row[key] = cell
            rows.append(row)
    return rows


def read_json(path) -> list[dict]:
    with open(path) as fh:
        return json.load(fh)
