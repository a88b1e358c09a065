import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from manifold_isqa.hessian import ScaledIdentity
from manifold_isqa.outer import OuterConfig, run
from manifold_isqa.problem import example1
from manifold_isqa.verify import (
    RateVerdict,
    SyntheticSpec,
    audit_identification,
    audit_rates,
    audit_sublinear,
    audit_weak_sharp,
    counterexample_trace,
    example1_instance,
    gen_instance,
    loglog_slope,
    qlinear_factor,
    stage_two_pairs,
    suite_identification,
    suite_superlinear,
    two_step_exponent,
)

seeds = st.integers(0, 2**31 - 1)


class TestRateVerdict:
    def test_le(self):
        assert RateVerdict("c", "i", 1.0, 1.0).passed
        assert RateVerdict("c", "i", 1.0 + 1e-12, 1.0).passed
        assert not RateVerdict("c", "i", 1.0 + 1e-6, 1.0).passed

    def test_ge(self):
        v = RateVerdict("c", "i", 1.5, 1.4, sense="ge")
        assert v.passed and v.margin == pytest.approx(0.1)
        assert not RateVerdict("c", "i", 1.3, 1.4, sense="ge").passed

    def test_json(self):
        d = RateVerdict("c", "i", math.inf, 1.0).to_dict()
        assert d["pass"] is False and set(d) == {"claim", "instance", "measured", "bound", "sense", "pass", "margin"}


class TestGenInstance:
    def test_example1(self):
        inst = example1_instance()
        np.testing.assert_array_equal(inst.x_star, [2.0, 0.0])
        assert inst.f_star == example1().objective(np.array([2.0, 0.0]))
        assert inst.residual == 0.0
        assert inst.support.zero_set.tolist() == [1]

    def test_full_shrinkage(self):
        spec = SyntheticSpec("separable_quadratic_l1", 4, params={"c": [1.0, 2.0, 0.5, 1.0],
                                                                   "a": [0.4, -0.2, 0.9, -0.1]})
        inst = gen_instance(spec)
        np.testing.assert_array_equal(inst.x_star, np.zeros(4))
        assert inst.support.nnz == 0

    @pytest.mark.parametrize("seed", range(3))
    def test_degenerate_segment(self, seed):
        inst = gen_instance(SyntheticSpec("degenerate_psd_l1", 8, 0.0, seed, params={"quartic_weight": 0.0}))
        lo, hi = inst.endpoints
        for e in (lo, 0.5 * (lo + hi), hi):
            assert inst.problem.stationarity(e) < 1e-12
            assert inst.problem.objective(e) == pytest.approx(inst.f_star, rel=1e-12, abs=1e-12)
        assert np.linalg.norm(hi - lo) > 1.0

    @settings(max_examples=20, deadline=None)
    @given(seeds, st.sampled_from(("random_strongly_convex_l1", "degenerate_psd_l1", "weak_sharp_l1")))
    def test_self_certified(self, seed, kind):
        inst = gen_instance(SyntheticSpec(kind, 9, 1.0, seed))
        assert inst.residual < 1e-12
        assert inst.spec.known_Fstar == inst.f_star

    def test_strongly_convex_sharpness(self):
        inst = gen_instance(SyntheticSpec("random_strongly_convex_l1", 10, 2.0, 0))
        zeta, theta, _ = inst.spec.sharpness
        assert theta == 0.5 and zeta == pytest.approx(1.0, rel=1e-15)
        assert np.linalg.eigvalsh(inst.problem.smooth.P)[0] >= 2.0 * (1 - 1e-12)

    def test_deterministic(self):
        a = gen_instance(SyntheticSpec("random_strongly_convex_l1", 12, 1.0, 5))
        b = gen_instance(SyntheticSpec("random_strongly_convex_l1", 12, 1.0, 5))
        assert a.x_star.tobytes() == b.x_star.tobytes()

    @pytest.mark.parametrize("kw", [{"kind": "lasso"}, {"kind": "separable_quadratic_l1", "dimension": 0}])
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            SyntheticSpec(**kw)


class TestIdentification:
    @pytest.mark.parametrize("sub", ["pg", "apg", "rpcd", "sparsa"])
    def test_example1(self, sub):
        inst = example1_instance()
        rep = run(inst.problem, OuterConfig(subsolver=sub, tol=1e-12, max_outer=25), x0=inst.x0)
        v = audit_identification(rep.trace, inst.x_star)
        assert v.identified and v.first_iteration <= 3

    def test_counterexample_never(self):
        v = audit_identification(counterexample_trace(), np.array([2.0, 0.0]))
        assert v.first_iteration is None and not v.identified

    def test_start_at_solution(self):
        inst = example1_instance()
        rep = run(inst.problem, OuterConfig(), x0=inst.x_star)
        assert audit_identification(rep.trace, inst.x_star).first_iteration == 0

    def test_lost_pattern_not_persistent(self):
        xs = [np.array([1.0, 0.0]), np.array([1.0, 1.0])]
        v = audit_identification(xs, np.array([2.0, 0.0]))
        assert not v.identified

    def test_builtin_suite(self):
        assert all(v.passed for v in suite_identification(builtin="example1"))


class TestRates:
    def test_qlinear_branches(self):
        # zeta^2 = 0.5 <= ||H|| = 1: branch zeta^2 / (2 ||H||) = 1/4
        assert qlinear_factor(1.0, 1.0, math.sqrt(0.5), 1e-4, 0.0) == pytest.approx(1 - 1e-4 / 4, rel=1e-15)
        assert qlinear_factor(1.0, 1.0, 2.0, 0.5, 0.0) == pytest.approx(1 - 0.5 * (1 - 1 / 8), rel=1e-15)

    @pytest.mark.parametrize("seed", range(3))
    def test_qlinear_audit(self, seed):
        inst = gen_instance(SyntheticSpec("random_strongly_convex_l1", 15, 1.0, seed))
        cfg = OuterConfig(hessian_kind="fixed", fixed_hessian=ScaledIdentity(15), subsolver="exact",
                          S=math.inf, tol=1e-12, max_outer=300)
        rep = run(inst.problem, cfg, fstar=inst.f_star)
        verdicts = audit_rates(rep, inst, cfg)
        assert any(v.claim == "qlinear" for v in verdicts)
        assert all(v.passed for v in verdicts)

    def test_weak_sharp(self):
        inst = gen_instance(SyntheticSpec("weak_sharp_l1", 6, 1.0, 0))
        cfg = OuterConfig(hessian_kind="fixed", fixed_hessian=ScaledIdentity(6), subsolver="exact",
                          S=math.inf, tol=1e-12, max_outer=100)
        rep = run(inst.problem, cfg, fstar=inst.f_star, x0=inst.x0)
        verdicts = audit_weak_sharp(rep, inst, cfg.gamma)
        assert verdicts and all(v.passed for v in verdicts)

    def test_loglog_slope_exact(self):
        ts = np.arange(1, 50)
        assert loglog_slope(ts, 3.0 * ts**-2.0) == pytest.approx(-2.0, rel=1e-12)

    def test_sublinear_oracle(self):
        # theta = 1/4 gives slope -2
        deltas = np.concatenate([[10.0], 5.0 * np.arange(1, 400) ** -2.0])
        v, slope = audit_sublinear(deltas, 0.25)
        assert v.passed and slope == pytest.approx(-2.0, rel=1e-9)
        v, _ = audit_sublinear(deltas, 0.4)
        assert not v.passed

    def test_two_step_exponent_exact(self):
        pairs = [(t, 10.0**-k, 10.0 ** (-2 * k)) for t, k in enumerate((1, 2, 3))]
        assert two_step_exponent(pairs) == pytest.approx(2.0, rel=1e-12)

    def test_stage_two_pairs_filters(self):
        pts = [np.array([e]) for e in (2.0, 0.5, 0.1, 0.01, 1e-4, 1e-8, 1e-16)]
        stages = ["init", "first", "mo", "pg", "mo", "pg", "mo"]
        got, errs = stage_two_pairs(pts, stages, np.zeros(1))
        # t=0 has e_t > 1 and step 1 in stage one; t=4 lands below the noise floor
        assert [p[0] for p in got] == [1, 2, 3]
        assert errs[0] == 2.0

    def test_superlinear_suite_small(self):
        out = suite_superlinear(n_instances=4, rhos=(0.5,))
        fr = [v for v in out if v.claim == "measurable_fraction"]
        assert fr and all(v.passed for v in out)


class TestDeterminism:
    def test_audits_repeat(self):
        a = [v.to_dict() for v in suite_identification(seed=3, n_instances=2, dimension=10, subsolvers=("rpcd",))]
        b = [v.to_dict() for v in suite_identification(seed=3, n_instances=2, dimension=10, subsolvers=("rpcd",))]
        assert a == b
