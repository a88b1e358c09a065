import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from manifold_isqa.hessian import DenseOperator, ScaledIdentity
from manifold_isqa.model import (
    QuadraticModel,
    StopCriterion,
    certified_gap,
    certified_gap_after_step,
    check_stop,
    eb_coefficient,
    prox_grad_step,
    q_value,
    residual_min_norm,
)
from manifold_isqa.problem import example1
from manifold_isqa.regularizer import L1Regularizer
from manifold_isqa.subsolvers import solve_oracle
from manifold_isqa.verify import audit_inequalities, counterexample_residuals, random_subproblem, sample_directions

seeds = st.integers(0, 2**32 - 1)


def separable_model():
    # exact minimizer (-2, 0) is representable, so every criterion is met with eps = 0
    return QuadraticModel(np.zeros(2), np.array([3.0, -0.5]), ScaledIdentity(2), L1Regularizer(1.0))


class TestQValue:
    def test_zero_direction(self):
        model = random_subproblem(1)
        assert q_value(model, np.zeros(model.dim)) == 0.0

    def test_term_by_term(self):
        model = QuadraticModel(np.zeros(2), np.array([1.0, -1.0]), ScaledIdentity(2), L1Regularizer(1.0))
        assert q_value(model, np.array([-1.0, 0.0])) == pytest.approx(0.5, rel=1e-15)

    def test_grid_minimum_1d(self):
        model = QuadraticModel(np.array([0.4]), np.array([-1.3]), ScaledIdentity(1, 2.0), L1Regularizer(0.5))
        p_star = solve_oracle(model).p
        grid = np.linspace(-3, 3, 60001)
        qs = [model.q_value(np.array([t])) for t in grid]
        assert model.q_value(p_star) <= min(qs) + 1e-12

    @settings(max_examples=40, deadline=None)
    @given(seeds)
    def test_difference_consistent(self, seed):
        model = random_subproblem(seed)
        rng = np.random.default_rng(seed)
        p, r = rng.normal(size=(2, model.dim))
        assert model.q_difference(p, r) == pytest.approx(model.q_value(p) - model.q_value(r), rel=1e-9, abs=1e-9)


class TestProxGradStep:
    def test_fixed_point(self):
        model = separable_model()
        p_star = np.array([-2.0, 0.0])
        np.testing.assert_array_equal(prox_grad_step(model, p_star, 1.0), p_star)

    def test_separable_one_step(self):
        model = separable_model()
        np.testing.assert_array_equal(model.prox_grad_step(np.zeros(2), 1.0), [-2.0, 0.0])

    def test_example1_model(self):
        prob = example1()
        x = np.array([3.0, 1.0])
        model = QuadraticModel(x, prob.smooth.grad(x), ScaledIdentity(2, 2.0), prob.reg)
        p = model.prox_grad_step(np.zeros(2), 0.5)
        np.testing.assert_allclose(p, [-1.0, -1.0], rtol=0, atol=1e-15)
        np.testing.assert_allclose(x + p, [2.0, 0.0], rtol=0, atol=1e-15)


class TestResidual:
    def test_zero_at_minimizer(self):
        model = separable_model()
        assert residual_min_norm(model, np.array([-2.0, 0.0])) == 0.0

    def test_oracle_minimizer(self):
        model = random_subproblem(11)
        assert model.residual_min_norm(solve_oracle(model).p) <= 1e-12

    def test_counterexample_bounded_away_from_zero(self):
        # second coordinate: 2 (0 - 0.3) + 0 + 1 = 0.4; the first tends to 0
        r = counterexample_residuals(50)
        assert abs(r[-1] - 0.4) < 1e-12
        assert np.all(r > 0.4 - 1e-12)

    @settings(max_examples=50, deadline=None)
    @given(seeds)
    def test_box_projection_3d(self, seed):
        model = random_subproblem(seed, dim=3)
        rng = np.random.default_rng(seed)
        p = rng.normal(size=3)
        z = model.base + p
        z[rng.random(3) < 0.4] = 0.0
        p = z - model.base
        s = model.grad + model.hess.to_dense() @ p
        lam = model.reg.lam
        lo = np.where(z > 0, lam, -lam)
        hi = np.where(z < 0, -lam, lam)
        dist = np.linalg.norm(s + np.clip(-s, lo, hi))
        assert model.residual_min_norm(p) == pytest.approx(dist, rel=1e-10, abs=1e-10)


class TestCheckStop:
    @pytest.mark.parametrize("kind", ["objective_gap", "residual_norm", "prox_grad_norm"])
    def test_exact_minimizer_passes(self, kind):
        assert check_stop(separable_model(), np.array([-2.0, 0.0]), StopCriterion(kind, 0.0))

    @pytest.mark.parametrize("kind", ["objective_gap", "residual_norm", "prox_grad_norm"])
    def test_origin_fails(self, kind):
        assert not check_stop(separable_model(), np.zeros(2), StopCriterion(kind, 1e-3))

    def test_multiplicative_tolerance(self):
        model = separable_model()
        p = np.array([-1.9, 0.0])
        # residual 0.1, -Q(p) = 1.995
        assert check_stop(model, p, StopCriterion("residual_norm", eta=0.06))
        assert not check_stop(model, p, StopCriterion("residual_norm", eta=0.04))

    def test_known_lower_bound(self):
        model = separable_model()
        q_star = model.q_value(np.array([-2.0, 0.0]))
        p = np.array([-1.99, 0.0])
        crit = StopCriterion("objective_gap", 1e-4)
        assert check_stop(model, p, crit, q_star_bound=q_star)

    @pytest.mark.parametrize("kw", [{"kind": "bogus"}, {"epsilon": -1.0}, {"eta": 1.0}])
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            StopCriterion(**kw)


class TestInequalities:
    def test_eb_coefficient_formula(self):
        m, M, tau = 0.3, 4.0, 0.2
        expect = tau * (((2 / m + tau) * (1 + M * tau)) / tau - 0.5) ** -1
        assert eb_coefficient(m, M, tau) == pytest.approx(expect, rel=1e-15)

    @settings(max_examples=30, deadline=None)
    @given(seeds)
    def test_chains_hold(self, seed):
        model = random_subproblem(seed)
        p_star = solve_oracle(model).p
        ps = sample_directions(model, p_star, 8, np.random.default_rng(seed))
        bad = [v for v in audit_inequalities(model, ps, p_star) if not v.passed]
        assert not bad, bad[:3]

    @settings(max_examples=30, deadline=None)
    @given(seeds)
    def test_certified_gaps_are_upper_bounds(self, seed):
        model = random_subproblem(seed)
        p_star = solve_oracle(model).p
        rng = np.random.default_rng(seed)
        for p in sample_directions(model, p_star, 5, rng):
            gap = model.q_difference(p, p_star)
            assert certified_gap(model, p) >= gap - 1e-9 * max(1.0, abs(gap))
            pbar = model.prox_grad_step(p)
            gap_bar = model.q_difference(pbar, p_star)
            assert certified_gap_after_step(model, p) >= gap_bar - 1e-9 * max(1.0, abs(gap_bar))

    def test_unit_free_form_needs_large_curvature(self):
        # with M < 1 the unit-free link can fail while the step-size form holds
        H = DenseOperator(np.array([[0.5]]))
        model = QuadraticModel(np.zeros(1), np.array([-0.1]), H, L1Regularizer(1.0))
        p = np.array([3.0])
        gap = model.q_value(p)
        G = np.linalg.norm(p - model.prox_grad_step(p))
        m = M = 0.5
        assert 2 * m * gap < (m / M) * G**2
        assert gap >= G**2 * M / 2 - 1e-12
