"""Tests for the incremental contact solver.

The projected sweeps are checked against exhaustive subset enumeration for
normal-only problems and against hand-derived one-point solutions for the
frictional cone; the incremental driver is checked for path consistency,
set-change handling, and the contact invariants after every step.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings
from hypothesis import strategies as st

from jointbe.contact import (
    OPEN,
    SLIP,
    STICK,
    ContactSolveError,
    ContactSolver,
    ContactState,
    SolverSettings,
    classify_sets,
    initial_state,
    pjor_solve,
    run_preload,
    step_increment,
)
from jointbe.coupling import RigidCondensed
from jointbe.halfspace import ComplianceMatrix


def lcp_enumeration(g, c, tol=1e-12):
    """Reference LCP solution by trying every closed subset (SPD: unique)."""
    n = c.size
    for r in range(n + 1):
        for subset in combinations(range(n), r):
            s = np.array(subset, int)
            x = np.zeros(n)
            if s.size:
                x[s] = np.linalg.solve(g[np.ix_(s, s)], -c[s])
                if (x[s] < -tol * max(np.abs(x).max(), 1.0)).any():
                    continue
            w = g @ x + c
            if (w < -tol * max(np.abs(w).max(), 1.0)).any():
                continue
            return x
    raise AssertionError("enumeration found no LCP solution")


def random_spd(n, rng, scale=1.0):
    a = rng.standard_normal((n, n))
    return scale * (a @ a.T + n * np.eye(n))


def make_rigid_op(czz, cxx=None, cyy=None):
    n = czz.shape[0]
    eye_like = np.eye(n) * czz.max()
    comp = ComplianceMatrix(
        czz=czz, cxx=eye_like if cxx is None else cxx,
        cyy=eye_like if cyy is None else cyy,
        points=np.zeros((n, 2)), point_index=np.arange(n), cell_area=1.0,
    )
    return RigidCondensed(comp)


@dataclass
class DenseOp:
    """Minimal condensed-operator stub over a full (3C, 3C) matrix."""

    c_star: np.ndarray

    @property
    def n_points(self):
        return self.c_star.shape[0] // 3

    def sub(self, rows, cols):
        return self.c_star[np.ix_(rows, cols)]

    def matvec(self, lam):
        return self.c_star @ lam


NORMAL_ONLY = SolverSettings(mu_friction=0.0)


class TestPjorNormalOnly:
    def test_single_point_closed_forms(self):
        g = np.array([[2.0]])
        x, _ = pjor_solve(g, np.array([-3.0]), np.zeros(1), NORMAL_ONLY, block=1)
        np.testing.assert_allclose(x, [1.5], rtol=1e-9)
        x, _ = pjor_solve(g, np.array([1.0]), np.zeros(1), NORMAL_ONLY, block=1)
        np.testing.assert_array_equal(x, [0.0])

    def test_matches_enumeration_on_random_instances(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            n = int(rng.integers(2, 7))
            g = random_spd(n, rng)
            c = rng.standard_normal(n) * 2.0
            x_ref = lcp_enumeration(g, c)
            x, _ = pjor_solve(g, c, np.zeros(n), NORMAL_ONLY, block=1)
            np.testing.assert_allclose(x, x_ref, atol=1e-8 * max(np.abs(x_ref).max(), 1.0))

    def test_warm_start_from_solution_is_cheap(self):
        rng = np.random.default_rng(8)
        g = random_spd(5, rng)
        c = rng.standard_normal(5)
        x, _ = pjor_solve(g, c, np.zeros(5), NORMAL_ONLY, block=1)
        _, iters = pjor_solve(g, c, x, NORMAL_ONLY, block=1)
        assert iters <= 2

    def test_strong_coupling_converges(self):
        # dense operator whose spectral radius dwarfs the diagonal blocks
        n = 30
        g = 0.05 * np.eye(n) + 0.95 * np.ones((n, n))
        x_true = np.linspace(1.0, 2.0, n)
        c = -g @ x_true
        tight = SolverSettings(mu_friction=0.0, tol_rel=1e-12)
        x, _ = pjor_solve(g, c, np.zeros(n), tight, block=1)
        np.testing.assert_allclose(x, x_true, rtol=1e-6)

    def test_indefinite_operator_detected(self):
        with pytest.raises(ContactSolveError, match="diverges|singular"):
            pjor_solve(np.array([[-1.0]]), np.array([-1.0]), np.zeros(1),
                       NORMAL_ONLY, block=1)


class TestPjorCone:
    def test_one_point_opens(self):
        s = SolverSettings(mu_friction=0.3)
        x, _ = pjor_solve(np.eye(3), np.array([2.0, 0.1, 0.0]), np.zeros(3), s)
        np.testing.assert_array_equal(x, np.zeros(3))

    def test_one_point_sticks(self):
        s = SolverSettings(mu_friction=0.3)
        g = np.diag([2.0, 1.0, 1.0])
        x, _ = pjor_solve(g, np.array([-2.0, 0.2, 0.0]), np.zeros(3), s)
        np.testing.assert_allclose(x, [1.0, -0.2, 0.0], atol=1e-9)

    def test_one_point_slips(self):
        s = SolverSettings(mu_friction=0.5)
        x, _ = pjor_solve(np.eye(3), np.array([-1.0, 1.0, 0.0]), np.zeros(3), s)
        np.testing.assert_allclose(x, [1.0, -0.5, 0.0], atol=1e-9)

    @hyp_settings(max_examples=25, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=10_000))
    def test_solution_satisfies_cone_conditions(self, seed):
        rng = np.random.default_rng(seed)
        n_pts = int(rng.integers(1, 5))
        mu = float(rng.uniform(0.1, 1.0))
        g = random_spd(3 * n_pts, rng)
        c = rng.standard_normal(3 * n_pts) * 2.0
        s = SolverSettings(mu_friction=mu, tol_rel=1e-12)
        x, _ = pjor_solve(g, c, np.zeros(3 * n_pts), s)
        w = g @ x + c
        scale = max(np.abs(w).max(), np.abs(x).max(), 1.0)
        xn, wt = x[0::3], w.reshape(-1, 3)[:, 1:]
        xt = x.reshape(-1, 3)[:, 1:]
        lt = np.hypot(xt[:, 0], xt[:, 1])
        assert (xn >= 0.0).all()
        assert (w[0::3] >= -1e-8 * scale).all()
        assert (xn * w[0::3] <= 1e-8 * scale**2).all()
        assert (lt <= mu * xn * (1 + 1e-9) + 1e-12 * scale).all()
        for p in range(n_pts):
            if xn[p] > 1e-9 * scale and lt[p] < mu * xn[p] * (1 - 1e-6):
                assert np.abs(wt[p]).max() <= 1e-7 * scale  # stick: no slip motion
            elif xn[p] > 1e-9 * scale:
                # slip motion opposes the tangential force
                assert xt[p] @ wt[p] <= 1e-8 * scale**2
                cross = xt[p, 0] * wt[p, 1] - xt[p, 1] * wt[p, 0]
                assert abs(cross) <= 1e-6 * scale**2


class TestClassification:
    def test_grazing_point_stays_closed(self):
        state = ContactState(
            lam=np.zeros(6), g=np.array([0.0, 0, 0, 1e-6, 0, 0]),
            g_ex=np.zeros(6), status=np.zeros(2, int),
        )
        sep, closed = classify_sets(state)
        assert closed.tolist() == [0]
        assert sep.tolist() == [1]

    def test_loaded_point_is_closed_even_with_tiny_gap_noise(self):
        state = ContactState(
            lam=np.array([5.0, 0, 0]), g=np.array([1e-18, 0, 0]),
            g_ex=np.zeros(3), status=np.zeros(1, int),
        )
        _, closed = classify_sets(state)
        assert closed.tolist() == [0]


class TestNormalIncrements:
    def test_single_point_ramp(self):
        op = make_rigid_op(np.array([[2e-9]]))
        solver = ContactSolver(op, NORMAL_ONLY)
        state = solver.initial_state(np.zeros(3))
        state, info = solver.step(state, np.array([-1e-6, 0.0, 0.0]))
        np.testing.assert_allclose(state.lam[0], 500.0, rtol=1e-9)
        assert abs(state.g[0]) <= 1e-15
        assert state.status[0] == SLIP  # frictionless closed
        assert info.set_retries == 0

    def test_unload_to_separation(self):
        op = make_rigid_op(np.array([[2e-9]]))
        solver = ContactSolver(op, NORMAL_ONLY)
        state = solver.initial_state(np.zeros(3))
        state, _ = solver.step(state, np.array([-1e-6, 0.0, 0.0]))
        state, _ = solver.step(state, np.array([2e-7, 0.0, 0.0]))
        assert state.lam[0] == 0.0
        np.testing.assert_allclose(state.g[0], 2e-7, rtol=1e-12)
        assert state.status[0] == OPEN

    def test_incremental_path_matches_total_enumeration(self):
        rng = np.random.default_rng(11)
        for trial in range(6):
            n = int(rng.integers(2, 6))
            czz = random_spd(n, rng, scale=1e-9)
            h = -rng.uniform(0.0, 2e-6, n)
            h[rng.integers(0, n)] = 0.0  # datum: tallest point grazes
            op = make_rigid_op(czz)
            delta = float(rng.uniform(1e-6, 4e-6))
            g_ex = np.zeros(3 * n)
            g_ex[0::3] = -h
            seq = []
            for frac in (0.3, 0.55, 0.8, 1.0):
                g = g_ex.copy()
                g[0::3] = -h - frac * delta
                seq.append(g)
            state, _ = run_preload(op, [g_ex] + seq, NORMAL_ONLY)
            lam_ref = lcp_enumeration(czz, -h - delta)
            np.testing.assert_allclose(
                state.lam[0::3], lam_ref,
                atol=1e-8 * max(lam_ref.max(), 1.0), rtol=1e-7,
            )
            # tangential components untouched in frictionless solves
            assert np.abs(state.lam[1::3]).max() == 0.0
            assert np.abs(state.lam[2::3]).max() == 0.0

    def test_grazing_start_loads_without_retry(self):
        op = make_rigid_op(np.array([[1e-9, 2e-10], [2e-10, 1e-9]]))
        solver = ContactSolver(op, NORMAL_ONLY)
        state = solver.initial_state(np.zeros(6))  # both points grazing
        g = np.zeros(6)
        g[0::3] = -1e-6
        state, info = solver.step(state, g)
        assert info.set_retries == 0
        assert (state.lam[0::3] > 0.0).all()

    def test_reclosing_after_full_separation(self):
        op = make_rigid_op(np.array([[1e-9]]))
        solver = ContactSolver(op, NORMAL_ONLY)
        state = solver.initial_state(np.array([1e-6, 0.0, 0.0]))
        assert classify_sets(state)[0].tolist() == [0]
        state, info = solver.step(state, np.array([-1e-6, 0.0, 0.0]))
        assert state.lam[0] == pytest.approx(1000.0, rel=1e-9)
        assert info.set_retries >= 1  # separated point had to be demoted


JENKINS = dict(cn=1e-9, ct=2e-9, mu=0.5, delta=1e-6)


def jenkins_march(u_values, use_prediction=True):
    p = JENKINS
    op = make_rigid_op(np.array([[p["cn"]]]), np.array([[p["ct"]]]),
                       np.array([[p["ct"]]]))
    s = SolverSettings(mu_friction=p["mu"], use_stick_prediction=use_prediction)
    solver = ContactSolver(op, s)
    state = solver.initial_state(np.zeros(3))
    state, _ = solver.step(state, np.array([-p["delta"], 0.0, 0.0]))
    states = []
    for u in u_values:
        state, _ = solver.step(state, np.array([-p["delta"], -u, 0.0]))
        states.append(state.copy())
    return states


class TestFrictionalIncrements:
    def test_jenkins_loading_phases(self):
        # hand values: lam_n = delta/cn = 1000, slip threshold lam_t = 500
        states = jenkins_march([0.4e-6, 0.9e-6, 1.4e-6])
        lam_t = [s.lam[1] for s in states]
        np.testing.assert_allclose(lam_t, [200.0, 450.0, 500.0], rtol=1e-8)
        assert states[0].status[0] == STICK
        assert states[1].status[0] == STICK
        assert states[2].status[0] == SLIP
        # during slip the contact keeps moving: g_t tracks the deficit
        np.testing.assert_allclose(states[2].g[1], -0.4e-6, rtol=1e-7)

    def test_jenkins_reversal_hysteresis(self):
        states = jenkins_march([1.4e-6, 0.6e-6, -0.4e-6, -0.6e-6])
        lam_t = [s.lam[1] for s in states]
        np.testing.assert_allclose(lam_t, [500.0, 100.0, -400.0, -500.0],
                                   rtol=1e-7, atol=1e-6)
        assert states[1].status[0] == STICK
        assert states[3].status[0] == SLIP

    def test_normal_force_unaffected_by_tangential_march(self):
        states = jenkins_march([0.5e-6, 1.5e-6, -1.0e-6])
        for s in states:
            np.testing.assert_allclose(s.lam[0], 1000.0, rtol=1e-9)

    def test_dissipativity_each_step(self):
        states = jenkins_march([0.7e-6, 1.6e-6, 0.2e-6, -1.5e-6])
        g_prev = np.zeros(3)
        for s in states:
            d_gt = s.g[1:3] - g_prev[1:3]
            assert s.lam[1:3] @ d_gt <= 1e-12
            g_prev = s.g

    def test_prediction_and_plain_paths_agree(self):
        u_path = [0.5e-6, 1.2e-6, 0.3e-6, -0.9e-6]
        with_pred = jenkins_march(u_path, use_prediction=True)
        without = jenkins_march(u_path, use_prediction=False)
        for a, b in zip(with_pred, without):
            np.testing.assert_allclose(a.lam, b.lam, rtol=1e-7, atol=1e-8)

    def test_previously_slipping_point_is_not_stick_predicted(self):
        p = JENKINS
        op = make_rigid_op(np.array([[p["cn"]]]), np.array([[p["ct"]]]),
                           np.array([[p["ct"]]]))
        solver = ContactSolver(op, SolverSettings(mu_friction=p["mu"]))
        state = solver.initial_state(np.zeros(3))
        state, _ = solver.step(state, np.array([-p["delta"], 0.0, 0.0]))
        state, info = solver.step(state, np.array([-p["delta"], -0.4e-6, 0.0]))
        assert info.pjor_iterations == 0  # pure stick: fully eliminated
        state, _ = solver.step(state, np.array([-p["delta"], -1.4e-6, 0.0]))
        assert state.status[0] == SLIP
        # reversal: the prediction lands inside the cone, but a point that
        # slipped last step may not be eliminated as sticking
        state, info = solver.step(state, np.array([-p["delta"], -0.6e-6, 0.0]))
        assert info.pjor_iterations > 0
        assert state.status[0] == STICK
        np.testing.assert_allclose(state.lam[1], 100.0, rtol=1e-7)


class TestCoupledInvariants:
    @staticmethod
    def check_invariants(op, prev, state, mu):
        lam_n = state.lam[0::3]
        g_n = state.g[0::3]
        f_scale = max(np.abs(state.lam).max(), 1e-300)
        g_scale = max(np.abs(state.g).max(), np.abs(state.g_ex).max(), 1e-300)
        assert (lam_n >= 0.0).all()
        assert (g_n >= -1e-8 * g_scale).all()
        assert (lam_n * g_n <= 1e-8 * f_scale * g_scale).all()
        lam_t = np.hypot(state.lam[1::3], state.lam[2::3])
        assert (lam_t <= mu * lam_n * (1 + 1e-9) + 1e-9 * f_scale).all()
        # elastic consistency of the tracked gaps
        np.testing.assert_allclose(
            state.g, state.g_ex + op.matvec(state.lam),
            rtol=0, atol=1e-12 * g_scale + 1e-300,
        )
        # frictional work of this step is non-positive
        d_g = (state.g - prev.g).reshape(-1, 3)[:, 1:]
        work = (state.lam.reshape(-1, 3)[:, 1:] * d_g).sum(axis=1)
        assert (work <= 1e-8 * f_scale * g_scale).all()

    def test_random_coupled_walks(self):
        rng = np.random.default_rng(21)
        for trial in range(8):
            n = int(rng.integers(2, 6))
            op = DenseOp(random_spd(3 * n, rng, scale=1e-9))
            mu = float(rng.uniform(0.2, 0.8))
            s = SolverSettings(mu_friction=mu, tol_rel=1e-12)
            solver = ContactSolver(op, s)
            h = -rng.uniform(0.0, 1e-6, n)
            h[rng.integers(0, n)] = 0.0
            g_ex = np.zeros(3 * n)
            g_ex[0::3] = -h
            state = solver.initial_state(g_ex)
            prev = state.copy()
            approach = 0.0
            for step in range(5):
                approach += float(rng.uniform(0.2e-6, 0.8e-6))
                g = np.zeros(3 * n)
                g[0::3] = -h - approach
                g[1::3] = rng.uniform(-0.3e-6, 0.3e-6)
                g[2::3] = rng.uniform(-0.3e-6, 0.3e-6)
                state, _ = solver.step(state, g)
                self.check_invariants(op, prev, state, mu)
                prev = state.copy()

    def test_unloading_walks_reach_separation_cleanly(self):
        rng = np.random.default_rng(22)
        op = DenseOp(random_spd(9, rng, scale=1e-9))
        s = SolverSettings(mu_friction=0.4, tol_rel=1e-12)
        solver = ContactSolver(op, s)
        g_ex = np.zeros(9)
        state = solver.initial_state(g_ex)
        prev = state.copy()
        for level in (-1e-6, -2e-6, -0.5e-6, 0.5e-6):
            g = np.zeros(9)
            g[0::3] = level
            state, _ = solver.step(state, g)
            self.check_invariants(op, prev, state, 0.4)
            prev = state.copy()
        assert (state.status == OPEN).all()
        assert np.abs(state.lam).max() == 0.0


class TestValidation:
    def test_initial_penetration_rejected(self):
        op = make_rigid_op(np.eye(2) * 1e-9)
        with pytest.raises(ValueError, match="penetration-free"):
            initial_state(op, np.array([-1e-6, 0, 0, 0, 0, 0]))

    def test_bad_settings_rejected(self):
        with pytest.raises(ValueError, match="friction"):
            SolverSettings(mu_friction=-0.1)
        with pytest.raises(ValueError, match="relaxation"):
            SolverSettings(mu_friction=0.0, omega_relax=0.0)

    def test_offset_size_checked(self):
        op = make_rigid_op(np.eye(2) * 1e-9)
        state = initial_state(op, np.zeros(6))
        with pytest.raises(ValueError):
            step_increment(op, state, np.zeros(5), NORMAL_ONLY)
