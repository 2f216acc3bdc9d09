import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from proxlab.dr import (
    DivergenceError,
    DRTrace,
    ParamSequence,
    StepSchedule,
    default_window,
    dr_step,
    fixed_point_operator,
    identification_iteration,
    observed_rate,
    product_lift,
    reference_fixed_point,
    run_dr,
    steps_to_exact_fixed_point,
)
from proxlab.instances import affine_constrained, finite_convergence_instance
from proxlab.prox import AffineIndicator, FunctionOracle, L1Ball, L1Norm, LinfBall, Zero
from proxlab.subspace import Basis, orthonormal_basis


def line(theta):
    return AffineIndicator.subspace(Basis(np.array([[np.cos(theta)], [np.sin(theta)]])))


def trace_of(fps):
    n = len(fps)
    z = np.zeros(n)
    return DRTrace(np.arange(n), z, z, z, z, z, z, list(fps), list(fps))


@pytest.fixture(scope="module")
def l1_instance():
    return affine_constrained("l1", 0)


class TestStep:
    def test_fixed_point_is_kept(self):
        inst = finite_convergence_instance()
        ref = reference_fixed_point(inst.G, inst.J, np.array([3.0, 1.0]), 0.25)
        assert ref.converged
        z, x, _ = dr_step(inst.G, inst.J, ref.z, ref.x, 0.25, 1.0, 0.25)
        assert np.array_equal(z, ref.z) and np.array_equal(x, ref.x)

    def test_same_subspace(self):
        f = AffineIndicator.subspace(orthonormal_basis([(1.0, 1.0, 0.0), (0.0, 0.0, 1.0)]))
        z = np.array([1.0, -2.0, 0.5])
        x = f.prox(z, 1.0)
        z2, x2, _ = dr_step(f, f, z, x, 1.0, 1.0, 1.0)
        assert np.allclose(f.prox(z2, 1.0), f.prox(z, 1.0))
        assert np.allclose(x2, f.prox(z2, 1.0))

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_reflected_composition(self, seed):
        rng = np.random.default_rng(seed)
        G = L1Ball(rng.standard_normal(4), 1.5)
        J = L1Norm(4)
        gamma, lam = rng.uniform(0.1, 3), rng.uniform(0.1, 1.9)
        z = rng.standard_normal(4) * 3

        def rprox(f, p):
            return 2 * f.prox(p, gamma) - p

        expected = (1 - lam) * z + lam * 0.5 * (rprox(G, rprox(J, z)) + z)
        z2, _, _ = dr_step(G, J, z, J.prox(z, gamma), gamma, lam, gamma)
        assert np.allclose(z2, expected, atol=1e-12)
        assert np.allclose(fixed_point_operator(G, J, gamma)(z), 0.5 * (rprox(G, rprox(J, z)) + z))


class TestRun:
    def test_two_lines_sixty_degrees(self):
        trace, _ = run_dr(line(0.0), line(np.pi / 3), np.array([1.0, 2.0]), StepSchedule.constant(1.0),
                          max_iter=40, reference=_zero_reference(2))
        ratios = trace.dist_z[1:] / trace.dist_z[:-1]
        assert np.allclose(ratios, 0.5, atol=1e-12)

    def test_start_at_fixed_point(self):
        trace, state = run_dr(line(0.0), line(1.0), np.zeros(2), StepSchedule.constant(1.0), max_iter=10)
        assert np.all(trace.residual == 0.0)
        assert state.k == 1

    def test_finite_convergence_instance(self):
        inst = finite_convergence_instance()
        trace, _ = run_dr(inst.G, inst.J, np.array([-4.0, 7.0]), StepSchedule.constant(0.25), max_iter=1000)
        assert trace.residual[-1] == 0.0 and len(trace) < 1000

    def test_stop_tolerance(self, l1_instance):
        trace, _ = run_dr(l1_instance.G, l1_instance.J, np.ones(32), StepSchedule.constant(1.0),
                          max_iter=5000, stop_tol=1e-6)
        assert trace.residual[-1] <= 1e-6
        assert np.all(trace.residual[:-1] > 1e-6)

    def test_residual_monotone(self, l1_instance):
        trace, _ = run_dr(l1_instance.G, l1_instance.J, np.ones(32) * 3, StepSchedule.constant(0.7), max_iter=400)
        assert np.all(trace.residual >= 0)
        assert np.all(np.diff(trace.residual) <= 1e-12)

    def test_two_runs_never_separate(self, l1_instance):
        G, J = l1_instance.G, l1_instance.J
        rng = np.random.default_rng(1)
        za, zb = rng.standard_normal(32) * 3, rng.standard_normal(32) * 3
        xa, xb = J.prox(za, 1.0), J.prox(zb, 1.0)
        gap = np.linalg.norm(za - zb)
        for _ in range(300):
            za, xa, _ = dr_step(G, J, za, xa, 1.0, 1.0, 1.0)
            zb, xb, _ = dr_step(G, J, zb, xb, 1.0, 1.0, 1.0)
            new_gap = np.linalg.norm(za - zb)
            assert new_gap <= gap + 1e-12
            gap = new_gap

    def test_divergence_guard(self):
        class Exploding(FunctionOracle):
            kind = "exploding"

            def prox(self, x, gamma):
                return 10.0 * np.asarray(x, dtype=float)

            def chart(self, x, tol=1e-8):
                return Zero(2).chart(x)

        with pytest.raises(DivergenceError):
            run_dr(Zero(2), Exploding(), np.ones(2), StepSchedule.constant(1.0), max_iter=100)

    def test_schedule_validation(self):
        bad = StepSchedule(ParamSequence(1.0), ParamSequence(1.5, "power_decay", amplitude=1.0))
        with pytest.raises(ValueError):
            run_dr(Zero(2), Zero(2), np.ones(2), bad, max_iter=5)
        with pytest.raises(ValueError):
            StepSchedule(ParamSequence(0.1, "geometric", amplitude=-1.0), ParamSequence(1.0)).validate(3)

    def test_schedule_diagnostics(self):
        s = StepSchedule(ParamSequence(1.0, "geometric", amplitude=1.0, ratio=0.5), ParamSequence(1.0))
        d = s.validate(60)
        assert d["sum_lam_gamma_gap"] == pytest.approx(2.0)
        assert d["sum_lam_2_minus_lam"] == pytest.approx(61.0)
        assert d["gamma_summable"]
        assert not ParamSequence(1.0, "power_decay", amplitude=1.0, exponent=1.0).summable

    def test_schedule_round_trip(self):
        s = StepSchedule(ParamSequence(1.0, "power_decay", amplitude=0.5, exponent=1.1), ParamSequence(1.2))
        t = StepSchedule.from_dict(s.to_dict())
        assert [t.gamma_at(k) for k in range(5)] == [s.gamma_at(k) for k in range(5)]
        assert StepSchedule.from_dict({"gamma": 2.0}).lam_at(3) == 1.0


def _zero_reference(n):
    from proxlab.dr import ReferenceSolution

    return ReferenceSolution(np.zeros(n), np.zeros(n), 0.0, 0, True, 1.0)


class TestReference:
    def test_two_subspaces_analytic(self):
        # A = span{e1, e2}, B = span{e1, (e2 + e3)/sqrt2} in R^4, intersect in span{e1};
        # the limit is the projection of z0 onto (A & B) + (A^perp & B^perp) = span{e1, e4}
        e = np.eye(4)
        A = AffineIndicator.subspace(orthonormal_basis([e[0], e[1]]))
        B = AffineIndicator.subspace(orthonormal_basis([e[0], (e[1] + e[2]) / np.sqrt(2)]))
        z0 = np.array([1.0, 2.0, -3.0, 0.5])
        ref = reference_fixed_point(A, B, z0, 1.0)
        assert np.allclose(ref.z, [1.0, 0.0, 0.0, 0.5], atol=1e-10)
        assert np.allclose(ref.x, [1.0, 0.0, 0.0, 0.0], atol=1e-10)
        z, _, _ = dr_step(A, B, ref.z, ref.x, 1.0, 1.0, 1.0)
        assert np.allclose(z, ref.z, atol=1e-12)

    @pytest.mark.parametrize("gamma", [0.25, 5.0])
    @pytest.mark.parametrize("start", [(-4.0, 7.0), (9.0, 9.0), (0.0, -10.0), (2.0, -1.0)])
    def test_finite_convergence_segment(self, gamma, start):
        inst = finite_convergence_instance()
        ref = reference_fixed_point(inst.G, inst.J, np.array(start), gamma)
        a, b = np.array([0.25, -0.75]), np.array([0.75, -0.25])
        t = (ref.x - a) @ (b - a) / ((b - a) @ (b - a))
        assert -1e-10 <= t <= 1 + 1e-10
        assert np.linalg.norm(ref.x - (a + t * (b - a))) < 1e-10
        # the fixed point sits one gamma-step along -(1, -1) from its shadow
        assert np.allclose(ref.z, ref.x - gamma * np.array([1.0, -1.0]), atol=1e-10)

    def test_exact_steps_zero_at_fixed_point(self):
        inst = finite_convergence_instance()
        ref = reference_fixed_point(inst.G, inst.J, np.array([1.0, 1.0]), 0.25)
        assert steps_to_exact_fixed_point(inst.G, inst.J, ref.z, 0.25) == 0

    def test_order_swap_same_objective(self, l1_instance):
        G, J = l1_instance.G, l1_instance.J
        z0 = np.zeros(32)
        a = reference_fixed_point(G, J, z0, 1.0)
        b = reference_fixed_point(J, G, z0, 1.0)
        obj_a = G.eval(a.x) + J.eval(a.x)
        obj_b = G.eval(b.x) + J.eval(b.x)
        assert np.isfinite(obj_a) and np.isfinite(obj_b)
        assert obj_a == pytest.approx(obj_b, abs=1e-8)

    def test_serialization(self):
        inst = finite_convergence_instance()
        ref = reference_fixed_point(inst.G, inst.J, np.array([1.0, 1.0]), 0.25)
        from proxlab.dr import ReferenceSolution

        back = ReferenceSolution.from_dict(ref.to_dict())
        assert np.array_equal(back.z, ref.z) and back.converged == ref.converged


class TestIdentification:
    def test_constant(self):
        assert identification_iteration(trace_of(["A"] * 4)) == (0, 0)

    def test_switch(self):
        assert identification_iteration(trace_of(["A", "A", "B", "B", "B"])) == (2, 2)

    def test_empty(self):
        assert identification_iteration(trace_of([])) == (None, None)

    def test_replay_support(self, l1_instance):
        G, J = l1_instance.G, l1_instance.J
        z0 = np.zeros(32)
        trace, _ = run_dr(G, J, z0, StepSchedule.constant(1.0), max_iter=300)
        k_j, _ = identification_iteration(trace)
        assert k_j is not None and k_j < 300
        z, x = z0, J.prox(z0, 1.0)
        supports = []
        for _ in range(300):
            supports.append(tuple(np.flatnonzero(np.abs(x) > 1e-8)))
            z, x, _ = dr_step(G, J, z, x, 1.0, 1.0, 1.0)
        assert len(set(supports[k_j:])) == 1
        assert all(fp == trace.fp_J[-1] for fp in trace.fp_J[k_j:])

    def test_fingerprint_ids(self):
        t = trace_of(["A", "B", "A", "C"])
        assert t.fingerprint_ids().tolist() == [0, 1, 0, 2]


class TestObservedRate:
    def test_pure_geometric(self):
        fit = observed_rate(0.9 ** np.arange(50))
        assert abs(fit.rate - 0.9) < 1e-12
        assert fit.r_squared == pytest.approx(1.0)

    def test_with_noise(self):
        rng = np.random.default_rng(0)
        k = np.arange(31)
        fit = observed_rate(3.0 * 0.5**k + 1e-15 * rng.random(k.size))
        assert abs(fit.rate - 0.5) < 1e-6

    def test_exact_zero_flagged(self):
        fit = observed_rate(np.array([1.0, 0.5, 0.0, 0.0]))
        assert fit.rate == 0.0 and fit.flag == "finite"

    def test_short_window(self):
        assert observed_rate(np.array([1.0]), (0, 0)).flag == "empty"

    def test_two_subspace_window(self):
        theta = np.deg2rad(50)
        trace, _ = run_dr(line(0.0), line(theta), np.array([1.0, 2.0]), StepSchedule.constant(1.0),
                          max_iter=200, reference=_zero_reference(2))
        win = default_window(trace.dist_z, 5)
        fit = observed_rate(trace.dist_z, win)
        assert fit.rate == pytest.approx(np.cos(theta), rel=1e-2)

    def test_window_floor(self):
        dist = np.concatenate([0.5 ** np.arange(20), np.full(5, 1e-30)])
        assert default_window(dist, 2) == (2, 19)
        assert default_window(dist, 2, reference_residual=1e-8)[1] < 19


class TestProductLift:
    def test_two_block_average(self):
        lift = product_lift([L1Norm(2), L1Norm(2)])
        z = np.array([1.0, 2.0, 3.0, 6.0])
        assert np.allclose(lift.G_diag.prox(z, 1.0), [2.0, 4.0, 2.0, 4.0])
        assert np.allclose(lift.average(z), [2.0, 4.0])
        assert np.allclose(lift.embed([1.0, 2.0]), [1.0, 2.0, 1.0, 2.0])

    def test_three_l1_copies(self):
        lift = product_lift([L1Norm(3)] * 3)
        z0 = lift.embed(np.array([4.0, -1.0, 2.0]))
        _, state = run_dr(lift.G_diag, lift.J_prod, z0, StepSchedule.constant(1.0), max_iter=200)
        assert np.allclose(lift.average(state.x), 0.0, atol=1e-12)

    def test_single_function_passthrough(self):
        f = LinfBall(np.array([1.0, -1.0, 0.5]), 0.7)
        lift = product_lift([f])
        z0 = np.array([3.0, 2.0, -1.0])
        sched = StepSchedule.constant(0.8)
        lifted, _ = run_dr(lift.G_diag, lift.J_prod, z0, sched, max_iter=50)
        plain, _ = run_dr(Zero(3), f, z0, sched, max_iter=50)
        assert np.array_equal(lifted.residual, plain.residual)

    def test_dimension_checks(self):
        with pytest.raises(ValueError):
            product_lift([L1Norm(2), L1Norm(3)])
        with pytest.raises(ValueError):
            product_lift([])
        with pytest.raises(ValueError):
            product_lift([L1Norm(2)], n=3)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 1.5), st.floats(0.1, 5.0), st.integers(0, 2**31))
def test_dr_limit_minimizes(angle, gamma, seed):
    """For two lines through the origin DR converges to the common point 0."""
    z0 = np.random.default_rng(seed).standard_normal(2)
    ref = reference_fixed_point(line(0.0), line(angle), z0, gamma, tol=1e-13)
    assert np.linalg.norm(ref.x) < 1e-10
