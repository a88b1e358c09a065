"""Exit criteria, each checked at its stated tolerance.  Every test records
one PASS/FAIL line, listed again in the terminal summary."""

import json
import os
import time
from pathlib import Path

import numpy as np
import pytest

from manifold_isqa.cli import main
from manifold_isqa.outer import OuterConfig, run
from manifold_isqa.problem import LogisticProblem, load_libsvm
from manifold_isqa.verify import (
    SyntheticSpec,
    audit_identification,
    audit_structure,
    example1_instance,
    gen_instance,
    suite_identification,
    suite_inequalities,
    suite_rates,
    suite_sublinear,
    suite_superlinear,
)

from _util import a9a_like, random_logistic, record_criterion, write_libsvm

pytestmark = pytest.mark.acceptance

HESSIANS = ("lbfgs", "newton")
SUBSOLVERS = ("pg", "apg", "rpcd", "sparsa")
A9A_ROWS = 2000


def failures(verdicts):
    return [v for v in verdicts if not v.passed]


def timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


def a9a_path():
    env = os.environ.get("MANIFOLD_ISQA_A9A")
    if env:
        return Path(env)
    return Path(__file__).parent / "data" / "a9a"


def dataset_protocol(path, tmp_path):
    """ISQA+-newton, lambda = 1, gamma = 1e-4, beta = 0.5, T = 5, S = 10, against
    a reference F*.  Returns (first iteration with rel_gap <= 1e-8, seconds,
    support stable over the last S iterations, rel_gap)."""
    ref = tmp_path / "ref.json"
    assert main(["reference", "--data", str(path), "--features", "123", "--rows", str(A9A_ROWS),
                 "-o", str(ref)]) == 0
    fstar = json.loads(ref.read_text())["value"]
    mat, labels = load_libsvm(path, n_features=123, max_rows=A9A_ROWS)
    prob = LogisticProblem(mat, labels, 1.0).composite()
    cfg = OuterConfig(algorithm="isqa_plus", hessian_kind="newton", gamma=1e-4, beta=0.5, T=5, S=10,
                      tol=1e-10, max_outer=200)
    rep, secs = timed(run, prob, cfg, fstar=fstar)
    hit = next((r.iteration for r in rep.trace if r.rel_gap <= 1e-8), None)
    # the run may stop in fewer than S iterations; then the whole trace is the window
    window = rep.trace[-min(int(cfg.S), len(rep.trace)):]
    stable = all(r.pattern == rep.final_pattern for r in window)
    return hit, secs, stable, rep.trace[-1].rel_gap


class TestAcceptance:
    def test_ac1_example1_exactness(self):
        inst = example1_instance()
        run(inst.problem, OuterConfig(), x0=inst.x0)  # warm-up
        worst_err, worst_iter, worst_secs, bad = 0.0, 0, 0.0, []
        for hess in HESSIANS:
            for sub in SUBSOLVERS:
                for x0 in (inst.x0, np.zeros(2)):
                    cfg = OuterConfig(hessian_kind=hess, subsolver=sub, tol=1e-12, max_outer=25)
                    rep, secs = timed(run, inst.problem, cfg, x0=x0)
                    err = float(np.linalg.norm(rep.x - inst.x_star))
                    ident = audit_identification(rep.trace, inst.x_star)
                    ok = err <= 1e-10 and ident.identified and rep.iterations <= 25 and secs < 0.1
                    if not ok:
                        bad.append(f"{hess}/{sub}/x0={x0.tolist()}")
                    worst_err = max(worst_err, err)
                    worst_iter = max(worst_iter, rep.iterations)
                    worst_secs = max(worst_secs, secs)
        ok = record_criterion("AC1", not bad, f"example1 16 runs: max err {worst_err:.1e}, max iters {worst_iter}, "
                                              f"max {worst_secs * 1e3:.1f} ms; failing {bad}")
        assert ok

    def test_ac2_inequality_audit(self):
        verdicts, secs = timed(suite_inequalities, seed=0, n_instances=200)
        bad = failures(verdicts)
        ok = record_criterion("AC2", not bad and secs < 60.0,
                              f"{len(verdicts)} checks on 200 subproblems, {len(bad)} failed, {secs:.1f} s")
        assert ok, bad[:5]

    def test_ac3_identification(self):
        verdicts = suite_identification(seed=0, n_instances=20, dimension=30, subsolvers=SUBSOLVERS)
        bad = failures(verdicts)
        counter = [v for v in verdicts if v.claim == "counterexample_never_identifies"]
        supports = [v for v in verdicts if v.claim == "final_support"]
        ok = record_criterion("AC3", not bad and len(supports) == 80 and len(counter) == 1,
                              f"{len(supports)} support checks + counterexample, {len(bad)} failed")
        assert ok, bad[:5]

    def test_ac4_qlinear(self):
        verdicts = suite_rates(seed=0)
        q = [v for v in verdicts if v.claim == "qlinear"]
        bad = failures(q)
        worst = max(v.measured / v.bound for v in q)
        ok = record_criterion("AC4", q and not bad,
                              f"{len(q)} first-stage ratios, {len(bad)} above bound, max ratio/bound {worst:.6f}")
        assert ok, bad[:5]

    def test_ac5_two_step_superlinear(self):
        verdicts, secs = timed(suite_superlinear, seed=0, n_instances=10, dimension=30, rhos=(0.5, 1.0),
                               min_exponents={0.5: 1.4, 1.0: 1.8})
        bad = failures(verdicts)
        exps = {rho: [v.measured for v in verdicts
                      if v.claim == "two_step_superlinear" and v.instance.endswith(f"rho={rho}")]
                for rho in (0.5, 1.0)}
        detail = ", ".join(f"rho={r}: {len(e)} measured, min exponent {min(e):.2f}" for r, e in exps.items() if e)
        ok = record_criterion("AC5", not bad and all(exps.values()) and secs < 30.0, f"{detail}, {secs:.1f} s")
        assert ok, bad[:5]

    def test_ac6_structure(self):
        reports = []
        inst = example1_instance()
        for hess in HESSIANS:
            for sub in SUBSOLVERS:
                reports.append(run(inst.problem, OuterConfig(hessian_kind=hess, subsolver=sub, tol=1e-12),
                                   x0=inst.x0))
        for seed in range(10):
            prob = random_logistic(seed, n=60, d=12, lam=0.3).composite()
            for hess in HESSIANS:
                reports.append(run(prob, OuterConfig(hessian_kind=hess, S=3, tol=1e-10, max_outer=300)))
        for seed in range(5):
            syn = gen_instance(SyntheticSpec("random_strongly_convex_l1", 30, 1.0, seed))
            reports.append(run(syn.problem, OuterConfig(S=2, tol=1e-12, max_outer=300)))
        verdicts = [v for rep in reports for v in audit_structure(rep)]
        bad = failures(verdicts)
        mo = sum(r.stage == "mo" for rep in reports for r in rep.trace)
        ok = record_criterion("AC6", not bad and mo > 0,
                              f"{len(reports)} traces, {len(verdicts)} checks ({mo} MO steps), {len(bad)} failed")
        assert ok, bad[:5]

    def test_ac7_a9a_subset(self, tmp_path):
        path = a9a_path()
        if not path.is_file():
            record_criterion("AC7", False, f"BLOCKED: a9a not found at {path} (set MANIFOLD_ISQA_A9A)")
            pytest.fail(f"a9a dataset unavailable at {path}; criterion cannot be evaluated here")
        hit, secs, stable, gap = dataset_protocol(path, tmp_path)
        ok = record_criterion("AC7", hit is not None and hit <= 200 and secs < 30.0 and stable,
                              f"a9a[:{A9A_ROWS}] rel_gap<=1e-8 at iteration {hit}, final {gap:.1e}, "
                              f"{secs:.2f} s, support stable {stable}")
        assert ok

    def test_ac7_protocol_on_a9a_shaped_surrogate(self, tmp_path):
        # same protocol on synthetic one-hot data in the a9a layout; not a substitute for AC7
        path = write_libsvm(tmp_path / "a9a_like.svm", *a9a_like(A9A_ROWS))
        hit, secs, stable, gap = dataset_protocol(path, tmp_path)
        print(f"AC7-surrogate rel_gap<=1e-8 at iteration {hit}, final {gap:.1e}, {secs:.2f} s, stable {stable}")
        assert hit is not None and hit <= 200 and secs < 30.0 and stable

    def test_ac8_sublinear(self):
        verdicts, secs = timed(suite_sublinear, seed=0)
        slopes = [v for v in verdicts if v.claim == "sublinear_slope"]
        bad = failures(verdicts)
        worst = max(v.measured for v in slopes)
        ok = record_criterion("AC8", slopes and not bad,
                              f"{len(slopes)} degenerate instances, max relative slope error {worst:.3f} "
                              f"(tolerance 0.25), {len(bad)} checks failed, {secs:.1f} s")
        assert ok, bad[:5]

    def test_ac9_derivatives(self):
        worst_g = worst_h = 0.0
        for seed in range(50):
            rng = np.random.default_rng(seed)
            loss = random_logistic(seed, n=30, d=10).loss
            x, v = rng.normal(size=(2, 10))
            h = 1e-6
            eye = np.eye(10)
            fd_g = np.array([(loss.value(x + h * e) - loss.value(x - h * e)) / (2 * h) for e in eye])
            g = loss.grad(x)
            fd_h = (loss.grad(x + h * v) - loss.grad(x - h * v)) / (2 * h)
            hv = loss.hess_vec(x, v)
            worst_g = max(worst_g, np.linalg.norm(g - fd_g) / np.linalg.norm(g))
            worst_h = max(worst_h, np.linalg.norm(hv - fd_h) / np.linalg.norm(hv))
        ok = record_criterion("AC9", worst_g <= 1e-5 and worst_h <= 1e-4,
                              f"50 instances: max rel grad error {worst_g:.1e} (1e-5), "
                              f"hess_vec {worst_h:.1e} (1e-4)")
        assert ok
