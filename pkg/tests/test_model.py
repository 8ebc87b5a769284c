import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fiberspin.errors import DomainError, ParameterError
from fiberspin.model import (
    InviscidState,
    LagrangianState,
    SpinParams,
    ViscousState,
    bc_residual_viscous,
    internal_energy,
    lagrangian_rhs,
    reconstruct_centerline,
    rhs_inviscid,
    rhs_lagrangian,
    rhs_viscous,
    viscous_jacobian,
    viscous_rhs,
)


class TestSpinParams:
    def test_lambda_derived(self):
        p = SpinParams(0.1, 0.25, 0.1)
        assert p.lam == pytest.approx(0.25**1.5 * 0.1, rel=1e-15)
        assert p.ratio == pytest.approx(0.1 / 0.0625, rel=1e-15)

    @pytest.mark.parametrize("bad", [
        dict(delta=-0.1, epsilon=0.25, kappa=0.1),
        dict(delta=0.1, epsilon=0.0, kappa=0.1),
        dict(delta=0.1, epsilon=0.25, kappa=1.0),
        dict(delta=0.1, epsilon=0.25, kappa=1.2),
        dict(delta=0.1, epsilon=0.25, kappa=-0.1),
        dict(delta=0.1, epsilon=0.25, kappa=0.1, length=0.0),
    ])
    def test_rejects_invalid(self, bad):
        with pytest.raises(ParameterError):
            SpinParams(**bad)

    def test_kappa_message_mentions_range(self):
        with pytest.raises(ParameterError, match="0 <= kappa < 1"):
            SpinParams(0.1, 0.25, 1.5)


class TestViscousRhs:
    def test_boundary_state_direct_substitution(self):
        # u'=(1-0.1-q0)/0.1, q'=1/eps^2=16, r'=1, beta'=-2/(eps*q0)
        p = SpinParams(0.1, 0.25, 0.1)
        q0 = 0.3
        d = rhs_viscous(ViscousState(1.0, q0, 1.0, 0.0), p)
        assert d[0] == pytest.approx((1 - 0.1 - q0) / 0.1, rel=1e-14)
        assert d[1] == pytest.approx(16.0, rel=1e-14)
        assert d[2] == 1.0
        assert d[3] == pytest.approx(-2 / (0.25 * q0), rel=1e-14)

    @given(eps=st.floats(0.05, 1.0), q0=st.floats(0.01, 0.9))
    @settings(deadline=None, max_examples=100)
    def test_dq_at_nozzle_is_inverse_eps_squared(self, eps, q0):
        p = SpinParams(0.1, eps, 0.0)
        d = rhs_viscous(ViscousState(1.0, q0, 1.0, 0.0), p)
        assert d[1] == pytest.approx(1.0 / eps**2, rel=1e-12)
        assert d[1] > 0

    def test_du_vanishes_at_p1_endpoint(self):
        for delta in (0.01, 0.1, 1.0):
            p = SpinParams(delta, 0.25, 0.1)
            d = rhs_viscous(ViscousState(1.0, 1.0 - 0.1, 1.0, 0.0), p)
            assert d[0] == 0.0

    @given(frac=st.floats(1e-6, 1.0), kappa=st.floats(0.0, 0.99))
    @settings(deadline=None, max_examples=100)
    def test_p1_range_gives_du_nonneg_dbeta_neg(self, frac, kappa):
        # For u=1, r=1, beta=0 and q0 in (0, 1-kappa]: u' >= 0 and beta' < 0.
        q0 = frac * (1.0 - kappa)
        p = SpinParams(0.1, 0.25, kappa)
        d = rhs_viscous(ViscousState(1.0, q0, 1.0, 0.0), p)
        assert d[0] >= 0.0
        assert d[3] < 0.0

    @pytest.mark.parametrize("state", [
        ViscousState(-1.0, 0.5, 1.0, 0.0),
        ViscousState(0.0, 0.5, 1.0, 0.0),
        ViscousState(1.0, 0.0, 1.0, 0.0),
        ViscousState(1.0, 0.5, -1.0, 0.0),
    ])
    def test_domain_errors(self, state):
        p = SpinParams(0.1, 0.25, 0.1)
        with pytest.raises(DomainError):
            rhs_viscous(state, p)

    def test_jacobian_matches_finite_differences(self):
        p = SpinParams(0.13, 0.2, 0.3)
        y = np.array([1.7, 0.4, 1.3, -0.6])
        J = viscous_jacobian(y, p)
        h = 1e-7
        for j in range(4):
            stencil = y.copy()
            stencil[j] += h
            fp = viscous_rhs(stencil, p)
            stencil[j] -= 2 * h
            fm = viscous_rhs(stencil, p)
            fd = (fp - fm) / (2 * h)
            assert np.allclose(J[:, j], fd, rtol=2e-6, atol=1e-8)


class TestBcResidual:
    def test_constructed_to_satisfy(self):
        p = SpinParams(0.1, 0.25, 0.1)
        left = ViscousState(1.0, 0.3, 1.0, 0.0)
        right = ViscousState(4.0, 4.0 - 0.1, 1.5, -0.5)  # q(L)=u-2k/sqrt(u)=4-0.1
        res = bc_residual_viscous(left, right, p)
        assert np.allclose(res, 0.0, atol=1e-15)

    def test_left_component(self):
        p = SpinParams(0.1, 0.25, 0.0)
        res = bc_residual_viscous(ViscousState(1.5, 0.3, 1.0, 0.0),
                                  ViscousState(2.0, 2.0, 1.5, -0.5), p)
        assert res[0] == pytest.approx(0.5)
        assert res[1] == 0.0
        assert res[2] == 0.0

    def test_kappa_zero_stress_free_end(self):
        p = SpinParams(0.1, 0.25, 0.0)
        res = bc_residual_viscous(ViscousState(1.0, 0.3, 1.0, 0.0),
                                  ViscousState(3.7, 3.7, 1.5, -0.5), p)
        assert res[3] == 0.0


class TestInviscidRhs:
    def test_initial_slope_closed_form(self):
        # v'(0) = 1/(eps (1 + kappa/2))
        p = SpinParams(0.0, 0.16, 0.5)
        d = rhs_inviscid(InviscidState(0.16, 1.0, 0.0), p)
        assert d[0] == pytest.approx(5.0, rel=1e-12)
        assert d[1] == 1.0

    def test_kappa_zero_reduces_to_surface_tension_free(self):
        p = SpinParams(0.0, 0.2, 0.0)
        v, r, beta = 0.37, 1.4, -0.8
        d = rhs_inviscid(InviscidState(v, r, beta), p)
        assert d[0] == pytest.approx(r * np.cos(beta) / v, rel=1e-14)
        assert d[2] == pytest.approx(-2 / v - (r**2 / v**2 + 1) * np.sin(beta) / r,
                                     rel=1e-14)

    def test_domain_error_at_singular_angle_equation(self):
        p = SpinParams(0.0, 0.25, 0.8)
        lam = p.lam
        v_bad = (lam**2) ** (1 / 3) * 0.999
        with pytest.raises(DomainError):
            rhs_inviscid(InviscidState(v_bad, 1.0, 0.0), p)


class TestLagrangianRhs:
    def test_inviscid_initial_acceleration(self):
        # delta=0: du/dt(0) = (1 + kappa/2)^-1 / eps^2
        p = SpinParams(0.0, 0.2, 0.3)
        d = rhs_lagrangian(LagrangianState(1.0, 1.0 - 0.3, 1.0, 0.0), p)
        assert d[0] == pytest.approx(1.0 / (1.15 * 0.04), rel=1e-13)

    @given(u=st.floats(0.5, 5.0), q=st.floats(0.05, 3.0), r=st.floats(0.3, 3.0),
           beta=st.floats(-1.2, 1.2), kappa=st.floats(0.0, 0.9))
    @settings(deadline=None, max_examples=100)
    def test_chain_rule_vs_euler_frame(self, u, q, r, beta, kappa):
        # d/dt = u * d/ds componentwise for delta > 0.
        p = SpinParams(0.07, 0.3, kappa)
        y = np.array([u, q, r, beta])
        assert np.allclose(lagrangian_rhs(y, p), u * viscous_rhs(y, p),
                           rtol=1e-12, atol=1e-12)


class TestInternalEnergy:
    def test_simple_values(self):
        assert internal_energy(1.0, 0.0, SpinParams(0.5, 0.25, 0.1)) == pytest.approx(0.9)
        assert internal_energy(4.0, 2.0, SpinParams(0.1, 0.25, 0.0)) == pytest.approx(3.95)

    def test_inviscid_independent_of_gradient(self):
        p = SpinParams(0.0, 0.25, 0.3)
        assert internal_energy(2.0, 5.0, p) == internal_energy(2.0, -7.0, p)

    def test_rejects_nonpositive_speed(self):
        with pytest.raises(DomainError):
            internal_energy(0.0, 0.0, SpinParams(0.1, 0.25, 0.1))

    def test_mass_flux_normalization(self):
        # A = 1/u makes the flux A*u = 1 identically.
        u = np.linspace(0.5, 8.0, 17)
        assert np.allclose((1.0 / u) * u, 1.0, rtol=1e-15)


class _StraightSolution:
    """Minimal stand-in solution with beta = 0 (straight ray)."""

    breakpoints = np.linspace(0.0, 1.0, 11)

    def evaluate(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.vstack([np.full_like(s, 2.0), np.full_like(s, 1.9),
                         1.0 + s, np.zeros_like(s)])
        return out[:, 0] if out.shape[1] == 1 and np.ndim(s) == 0 else out


class TestCenterline:
    def test_zero_beta_gives_straight_ray(self):
        line = reconstruct_centerline(_StraightSolution())
        assert np.allclose(line.phi, 0.0, atol=1e-14)
        assert np.allclose(line.y, 0.0, atol=1e-14)
        assert np.allclose(line.x, 1.0 + line.s, rtol=1e-14)
        assert np.allclose(line.area, 0.5, rtol=1e-14)

    def test_initial_angle_rate_vanishes(self, table1_point):
        params, solution = table1_point
        line = reconstruct_centerline(solution)
        # phi'(0) = 0: the first increment is O(h^2) with phi''(0) = beta'(0).
        h = line.s[1] - line.s[0]
        dbeta0 = solution.derivative(0.0)[3]
        assert abs(line.phi[1] - line.phi[0]) < abs(dbeta0) * h**2

    def test_chord_matches_arc_length(self, table1_point):
        params, solution = table1_point
        line = reconstruct_centerline(solution)
        chord = np.hypot(np.diff(line.x), np.diff(line.y))
        ds = np.diff(line.s)
        # |gamma(s+h)-gamma(s)| = h + O(h^3); curvature alpha' = beta' + phi'
        s_mid = 0.5 * (line.s[1:] + line.s[:-1])
        states = solution.evaluate(s_mid)
        dstates = solution.derivative(s_mid)
        curvature = np.abs(dstates[3] + np.sin(states[3]) / states[2])
        bound = ds**3 * curvature**2 / 24.0 * 4.0 + 1e-12
        assert np.all(np.abs(chord - ds) <= bound)
