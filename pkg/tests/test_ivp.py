import numpy as np
import pytest

from fiberspin.errors import DomainError, OutOfSpan, StepBudgetExceeded
from fiberspin.ivp import IvpConfig, Trajectory, evaluate, integrate
from fiberspin.model import SpinParams, inviscid_rhs


def exp_rhs(t, y):
    return y


def test_exponential_growth():
    traj = integrate(exp_rhs, np.array([1.0]), (0.0, 1.0),
                     IvpConfig(rel_tol=1e-8, abs_tol=1e-10))
    assert traj.end_state[0] == pytest.approx(np.e, abs=1e-7)


def test_riccati_decay():
    # y' = -y^2, y(0)=1 -> y(t) = 1/(1+t)
    traj = integrate(lambda t, y: -y**2, np.array([1.0]), (0.0, 2.0),
                     IvpConfig(rel_tol=1e-9, abs_tol=1e-11))
    assert traj.end_state[0] == pytest.approx(1.0 / 3.0, abs=1e-7)


class TestDenseOutput:
    def test_node_values_exact(self):
        traj = integrate(exp_rhs, np.array([1.0]), (0.0, 1.0), IvpConfig())
        for i in (0, len(traj.ts) // 2, -1):
            assert evaluate(traj, traj.ts[i])[0] == traj.ys[i, 0]

    def test_interior_point(self):
        traj = integrate(exp_rhs, np.array([1.0]), (0.0, 1.0),
                         IvpConfig(rel_tol=1e-8, abs_tol=1e-10))
        assert evaluate(traj, 0.5)[0] == pytest.approx(np.exp(0.5), abs=1e-7)

    def test_midpoints_consistent_with_halved_tolerance(self):
        # Step-midpoint interpolants agree with a re-integration at halved
        # tolerance to within 10x the coarse tolerance.
        rhs = lambda t, y: np.array([np.cos(t) * y[0]])
        tol = 1e-7
        coarse = integrate(rhs, np.array([1.0]), (0.0, 5.0),
                           IvpConfig(rel_tol=tol, abs_tol=tol * 1e-2))
        fine = integrate(rhs, np.array([1.0]), (0.0, 5.0),
                         IvpConfig(rel_tol=tol / 2, abs_tol=tol / 2 * 1e-2))
        mids = 0.5 * (coarse.ts[1:] + coarse.ts[:-1])
        diff = np.abs(coarse.evaluate(mids)[0] - fine.evaluate(mids)[0])
        scale = np.abs(fine.evaluate(mids)[0])
        assert np.max(diff / (1.0 + scale)) < 10.0 * tol

    def test_out_of_span(self):
        traj = integrate(exp_rhs, np.array([1.0]), (0.0, 1.0), IvpConfig())
        with pytest.raises(OutOfSpan):
            traj.evaluate(1.5)
        with pytest.raises(OutOfSpan):
            traj.evaluate(-0.1)

    def test_vectorized_evaluation(self):
        traj = integrate(exp_rhs, np.array([1.0]), (0.0, 1.0), IvpConfig())
        s = np.linspace(0.0, 1.0, 37)
        vals = traj.evaluate(s)
        assert vals.shape == (1, 37)
        assert np.allclose(vals[0], np.exp(s), atol=1e-6)


class TestFixedStepOrder:
    def _global_error(self, h, low):
        rhs = lambda t, y: np.array([np.cos(t) * y[0]])
        traj = integrate(rhs, np.array([1.0]), (0.0, 4.0),
                         IvpConfig(fixed_step=h, advance_low_order=low))
        return abs(traj.end_state[0] - np.exp(np.sin(4.0)))

    def test_advancing_member_is_fifth_order(self):
        e1, e2 = self._global_error(0.05, False), self._global_error(0.025, False)
        assert e1 / e2 >= 2**5 * 0.8

    def test_embedded_member_is_fourth_order(self):
        e1, e2 = self._global_error(0.025, True), self._global_error(0.0125, True)
        assert e1 / e2 >= 2**4 * 0.8


class TestDomainStop:
    def test_truncates_with_marker(self):
        def rhs(t, y):
            if t > 0.5:
                raise DomainError("wall at t=0.5")
            return np.array([1.0])

        traj = integrate(rhs, np.array([0.0]), (0.0, 1.0), IvpConfig())
        assert traj.domain_stop is not None
        assert traj.span[1] < 1.0
        assert traj.span[1] == pytest.approx(0.5, abs=1e-2)

    def test_initial_domain_error_propagates(self):
        def rhs(t, y):
            raise DomainError("nowhere valid")

        with pytest.raises(DomainError):
            integrate(rhs, np.array([0.0]), (0.0, 1.0), IvpConfig())

    def test_step_budget(self):
        with pytest.raises(StepBudgetExceeded):
            integrate(exp_rhs, np.array([1.0]), (0.0, 1.0),
                      IvpConfig(max_steps=3))


class TestInviscidSystem:
    def test_speed_strictly_increasing(self):
        params = SpinParams(0.0, 0.16, 0.5, 1.0)
        traj = integrate(lambda s, y: inviscid_rhs(y, params),
                         np.array([0.16, 1.0, 0.0]), (0.0, 1.0),
                         IvpConfig(rel_tol=1e-10, abs_tol=1e-12))
        assert traj.domain_stop is None
        s = np.linspace(0.0, 1.0, 300)
        v = traj.evaluate(s)[0]
        assert np.all(np.diff(v) > 0)

    def test_surface_tension_alters_marginally(self):
        # kappa=0.5 vs kappa=0 phase portraits stay close (same eps).
        cfg = IvpConfig(rel_tol=1e-10, abs_tol=1e-12)
        p1 = SpinParams(0.0, 0.16, 0.5, 1.0)
        p0 = SpinParams(0.0, 0.16, 0.0, 1.0)
        y0 = np.array([0.16, 1.0, 0.0])
        t1 = integrate(lambda s, y: inviscid_rhs(y, p1), y0, (0.0, 1.0), cfg)
        t0 = integrate(lambda s, y: inviscid_rhs(y, p0), y0, (0.0, 1.0), cfg)
        s = np.linspace(0.0, 1.0, 100)
        r1, b1 = t1.evaluate(s)[1:], None
        r0 = t0.evaluate(s)[1:]
        assert np.max(np.abs(t1.evaluate(s) - t0.evaluate(s))) < 0.12
        assert np.max(np.abs(r1[0] - r0[0])) / np.max(np.abs(r0[0])) < 0.05

    def test_lemma2_identity_against_four_variable_system(self):
        # Integrate (v, w, r, beta) with w' = r cos(beta)/v and v' from the
        # differentiated constraint; w must match v - lam/sqrt(v) from the
        # reduced 3-variable system within 10x the tolerance.
        params = SpinParams(0.0, 0.2, 0.4, 1.0)
        lam = params.lam
        tol = 1e-10

        def rhs4(s, y):
            v, w, r, beta = y
            cosb, sinb = np.cos(beta), np.sin(beta)
            dv = r * cosb / (v + lam / (2.0 * np.sqrt(v)))
            dw = r * cosb / v
            dbeta = -2.0 / w - (r**2 / (v * w) + 1.0) * sinb / r
            return np.array([dv, dw, cosb, dbeta])

        eps = params.epsilon
        w0 = eps * (1.0 - params.kappa)
        traj4 = integrate(rhs4, np.array([eps, w0, 1.0, 0.0]), (0.0, 1.0),
                          IvpConfig(rel_tol=tol, abs_tol=tol * 1e-2))
        traj3 = integrate(lambda s, y: inviscid_rhs(y, params),
                          np.array([eps, 1.0, 0.0]), (0.0, 1.0),
                          IvpConfig(rel_tol=tol, abs_tol=tol * 1e-2))
        s = np.linspace(0.0, 1.0, 200)
        v3 = traj3.evaluate(s)[0]
        w_from_identity = v3 - lam / np.sqrt(v3)
        w4 = traj4.evaluate(s)[1]
        assert np.max(np.abs(w4 - w_from_identity)) < 10.0 * 1e-8
