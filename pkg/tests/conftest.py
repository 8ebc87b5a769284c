import numpy as np
import pytest

from fiberspin.bvp import solve_bvp, viscous_system, inviscid_guess
from fiberspin.model import SpinParams


@pytest.fixture(scope="session")
def table1_point():
    """Converged solution at the reference point delta=0.1, eps=0.25, kappa=0.1, L=1."""
    params = SpinParams(0.1, 0.25, 0.1, 1.0)
    report = solve_bvp(viscous_system(params), inviscid_guess(params), 1e-8)
    assert report.converged
    return params, report.solution
