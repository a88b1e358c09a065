"""Executable convergence checks: synthetic instances with known solutions,
inequality audits on subproblems, identification and rate audits on traces."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.stats import ortho_group

from .hessian import DenseOperator, ScaledIdentity
from .model import QuadraticModel, eb_coefficient
from .outer import OuterConfig, run
from .problem import CompositeProblem, QuadraticFunction, QuarticFunction, example1
from .regularizer import L1Regularizer, SupportPattern, manifold_of, soft_threshold
from .subsolvers import solve_oracle

SYNTHETIC_KINDS = (
    "separable_quadratic_l1",
    "random_strongly_convex_l1",
    "degenerate_psd_l1",
    "weak_sharp_l1",
)
CERTIFY_TOL = 1e-12
REL_SLACK = 1e-9


@dataclass
class SyntheticSpec:
    """Recipe for a synthetic instance; ground-truth fields are filled by
    :func:`gen_instance`."""

    kind: str
    dimension: int = 10
    mu: float = 1.0
    seed: int = 0
    lam: float = 1.0
    params: dict = field(default_factory=dict)
    known_solution: Optional[np.ndarray] = None
    known_Fstar: Optional[float] = None
    sharpness: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in SYNTHETIC_KINDS:
            raise ValueError(f"unknown synthetic kind {self.kind!r}")
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if self.mu < 0:
            raise ValueError("mu must be nonnegative")


@dataclass
class SyntheticInstance:
    problem: CompositeProblem
    spec: SyntheticSpec
    x_star: np.ndarray
    f_star: float
    residual: float
    x0: np.ndarray
    endpoints: Optional[List[np.ndarray]] = None

    @property
    def support(self):
        return manifold_of(self.x_star)


@dataclass
class RateVerdict:
    claim: str
    instance: str
    measured: float
    bound: float
    passed: bool = field(init=False)
    margin: float = field(init=False)
    sense: str = "le"

    def __post_init__(self):
        if self.sense == "le":
            self.margin = self.bound - self.measured
        else:
            self.margin = self.measured - self.bound
        ref = abs(self.bound)
        self.passed = bool(self.margin >= -REL_SLACK * ref)

    def to_dict(self):
        return {
            "claim": self.claim,
            "instance": self.instance,
            "measured": _jsonable(self.measured),
            "bound": _jsonable(self.bound),
            "sense": self.sense,
            "pass": self.passed,
            "margin": _jsonable(self.margin),
        }


def _jsonable(v):
    v = float(v)
    if math.isnan(v) or math.isinf(v):
        return str(v)
    return v


def _spd(rng, d, lo, hi):
    """Random SPD matrix with extreme eigenvalues exactly ``lo`` and ``hi``."""
    Q = ortho_group.rvs(d, random_state=rng) if d > 1 else np.ones((1, 1))
    ev = np.sort(rng.uniform(lo, hi, size=d))
    ev[0] = lo
    if d > 1:
        ev[-1] = hi
    P = (Q * ev) @ Q.T
    return 0.5 * (P + P.T)


def _plant(rng, d, support, lam, margin=0.8, low=0.5, high=2.0):
    """Solution on ``support`` and a gradient there meeting strict complementarity."""
    x = np.zeros(d)
    x[support] = rng.choice([-1.0, 1.0], size=support.size) * rng.uniform(low, high, support.size)
    g = rng.uniform(-margin * lam, margin * lam, size=d)
    g[support] = -lam * np.sign(x[support])
    return x, g


def _certify(problem, x):
    r = problem.stationarity(x)
    if not r < CERTIFY_TOL:
        raise RuntimeError(f"ground truth failed certification: residual {r:.3e}")
    return r


def gen_instance(spec: SyntheticSpec) -> SyntheticInstance:
    rng = np.random.default_rng(spec.seed)
    d = spec.dimension
    lam = spec.lam
    reg = L1Regularizer(lam)
    prm = spec.params
    x0 = np.zeros(d)
    endpoints = None

    if spec.kind == "separable_quadratic_l1":
        c = np.asarray(prm["c"], float) if "c" in prm else rng.uniform(0.5, 2.0, d)
        a = np.asarray(prm["a"], float) if "a" in prm else rng.normal(0.0, 2.0, d)
        if c.shape != (d,) or a.shape != (d,) or np.any(c <= 0):
            raise ValueError("c and a must have the instance dimension, c > 0")
        smooth = QuadraticFunction.separable(c, a)
        x_star = soft_threshold(a, lam / (2.0 * c))
        mu = 2.0 * float(c.min())
        sharp = (math.sqrt(mu / 2.0), 0.5, math.inf)
        if "x0" in prm:
            x0 = np.asarray(prm["x0"], float)

    elif spec.kind == "random_strongly_convex_l1":
        mu = spec.mu
        if not mu > 0:
            raise ValueError("random_strongly_convex_l1 needs mu > 0")
        cond = float(prm.get("cond", 10.0))
        k = int(prm.get("support", max(1, d // 3)))
        P = _spd(rng, d, mu, mu * cond)
        support = np.sort(rng.choice(d, size=k, replace=False))
        x_star, g_star = _plant(rng, d, support, lam)
        a = x_star - np.linalg.solve(P, g_star)
        smooth = QuadraticFunction(P, a)
        sharp = (math.sqrt(mu / 2.0), 0.5, math.inf)
        if "start_offset" in prm:
            # start on the solution's support, at distance start_offset from x*
            u = np.zeros(d)
            u[support] = rng.normal(size=k)
            x0 = x_star + float(prm["start_offset"]) * u / np.linalg.norm(u)

    elif spec.kind == "degenerate_psd_l1":
        if d < 3:
            raise ValueError("degenerate_psd_l1 needs dimension >= 3")
        w = float(prm.get("quartic_weight", 1.0))
        cond = float(prm.get("cond", 10.0))
        k = int(prm.get("support", max(2, d // 3)))
        v = np.zeros(d)
        v[0], v[1] = 1.0 / math.sqrt(2.0), -1.0 / math.sqrt(2.0)
        proj = np.eye(d) - np.outer(v, v)
        P = proj @ _spd(rng, d, 1.0, cond) @ proj
        P = 0.5 * (P + P.T)
        others = rng.choice(np.arange(2, d), size=k - 2, replace=False) if k > 2 else []
        support = np.sort(np.concatenate([[0, 1], np.asarray(others, dtype=int)]))
        x_star, g_star = _plant(rng, d, support, lam)
        # the flat direction lies inside one orthant, where lam ||x||_1 is linear
        x_star[0], x_star[1] = 3.0, 3.0
        g_star[0] = g_star[1] = -lam
        a = x_star - np.linalg.pinv(P) @ g_star
        shift = float(prm.get("start_offset", 1.7))
        x0 = x_star + shift * v
        if w > 0:
            smooth = QuarticFunction(P, a, v[None, :], x_star, [w])
            t_max = (4.0 * (_f0_gap(P, a, x_star, x0, reg, v, w)) / w) ** 0.25
            smooth.set_lipschitz(float(np.linalg.eigvalsh(P)[-1]) + 3.0 * w * t_max**2)
            sharp = (math.nan, 0.25, math.inf)
        else:
            smooth = QuadraticFunction(P, a)
            sharp = (math.nan, 0.5, math.inf)
            endpoints = [x_star - math.sqrt(2.0) * x_star[0] * v, x_star + math.sqrt(2.0) * x_star[1] * v]
        mu = 0.0

    else:  # weak_sharp_l1
        eps = float(prm.get("eps", 1e-2))
        c = rng.uniform(-0.5 * lam, 0.5 * lam, d)
        smooth = QuadraticFunction(eps * np.eye(d), -c / eps)
        x_star = np.zeros(d)
        mu = eps
        sharp = (lam - float(np.max(np.abs(c))), 1.0, math.inf)
        x0 = rng.normal(0.0, 3.0, d)

    problem = CompositeProblem(smooth, reg, name=f"{spec.kind}-d{d}-s{spec.seed}")
    residual = _certify(problem, x_star)
    if endpoints is not None:
        for e in endpoints:
            _certify(problem, e)
    f_star = problem.objective(x_star)
    spec.known_solution = x_star
    spec.known_Fstar = f_star
    spec.sharpness = sharp
    spec.mu = mu
    return SyntheticInstance(problem, spec, x_star, f_star, residual, x0, endpoints)


def _f0_gap(P, a, x_star, x0, reg, v, w):
    quad = QuadraticFunction(P, a)
    t0 = float(v @ (x0 - x_star))
    return (quad.value(x0) + reg.value(x0) + 0.25 * w * t0**4) - (quad.value(x_star) + reg.value(x_star))


def example1_instance():
    return gen_instance(
        SyntheticSpec(
            "separable_quadratic_l1", 2, params={"c": [1.0, 1.0], "a": [2.5, 0.3], "x0": [3.0, 1.0]}
        )
    )


# ---------------------------------------------------------------- subproblems


def random_subproblem(seed, dim=None, m_range=(0.01, 1.0), M_range=(1.0, 10.0)):
    """A strongly convex model with ``m <= ||H|| = M`` and ``M >= 1``."""
    rng = np.random.default_rng(seed)
    d = int(dim) if dim is not None else int(rng.integers(1, 21))
    M = float(rng.uniform(*M_range))
    m = M * float(rng.uniform(*m_range)) if d > 1 else M
    H = DenseOperator(_spd(rng, d, m, M))
    base = np.where(rng.random(d) < 0.5, rng.normal(0, 1, d), 0.0)
    grad = rng.normal(0.0, 2.0, d)
    reg = L1Regularizer(float(rng.uniform(0.1, 2.0)))
    return QuadraticModel(base, grad, H, reg)


def sample_directions(model, p_star, n, rng):
    out = []
    for _ in range(n):
        scale = 10.0 ** rng.uniform(-3, 0.5)
        p = p_star + scale * rng.normal(size=model.dim)
        # also probe points sitting on the kink set of the regularizer
        if rng.random() < 0.3:
            z = model.base + p
            z[rng.random(model.dim) < 0.5] = 0.0
            p = z - model.base
        out.append(p)
    return out


def audit_inequalities(model, samples, p_star=None, tau=None, instance="model"):
    """Check, per sample ``p``:

    ``||r||^2 >= 2 m (Q(p) - Q*)``; ``2 m (Q(p) - Q*) >= (m / M) G^2``
    (the unit-free version, valid when ``M >= 1``); the step-size form
    ``Q(p) - Q* >= G^2 / (2 tau)``; and the error bound on the
    prox-gradient point ``pbar``.  Gaps are measured against the oracle
    minimizer ``p_star`` by direct differences.
    """
    m, M = model.m_hat, model.M_hat
    tau = 1.0 / M if tau is None else tau
    if p_star is None:
        p_star = solve_oracle(model).p
    hp_star = model.hess.apply(p_star)
    coef = eb_coefficient(m, M, tau)
    out = []
    for k, p in enumerate(samples):
        tag = f"{instance}#{k}"
        hp = model.hess.apply(p)
        gap = model.q_difference(p, p_star, hp_star)
        r = model.residual_min_norm(p, hp)
        pbar = model.prox_grad_step(p, tau, hp)
        G = float(np.linalg.norm(p - pbar))
        gap_bar = model.q_difference(pbar, p_star, hp_star)
        out.append(RateVerdict("kl_residual", tag, 2.0 * m * gap, r * r))
        out.append(RateVerdict("pg_gap_unit_free", tag, (m / M) * G * G, 2.0 * m * gap))
        out.append(RateVerdict("pg_gap_step", tag, G * G / (2.0 * tau), gap))
        out.append(RateVerdict("error_bound", tag, coef * gap_bar, G * G))
    return out


# ------------------------------------------------------------- identification


@dataclass
class IdentificationVerdict:
    first_iteration: Optional[int]
    persistent: bool
    target: SupportPattern

    @property
    def identified(self):
        return self.first_iteration is not None and self.persistent

    def to_dict(self):
        return {
            "first_iteration": self.first_iteration,
            "persistent": self.persistent,
            "identified": self.identified,
            "target_zero_set": self.target.zero_set.tolist(),
        }


def audit_identification(trace, target):
    """First iteration from which the pattern equals ``target`` through the
    end of ``trace``.  ``trace`` holds patterns, points, or trace records."""
    if not isinstance(target, SupportPattern):
        target = manifold_of(target)
    pats = [_as_pattern(t) for t in trace]
    first = None
    for i, pt in enumerate(pats):
        if pt == target:
            if first is None:
                first = i
        else:
            first = None
    return IdentificationVerdict(first, first is not None, target)


def _as_pattern(item):
    if isinstance(item, SupportPattern):
        return item
    pat = getattr(item, "pattern", None)
    if isinstance(pat, SupportPattern):
        return pat
    return manifold_of(np.asarray(item, dtype=float))


def counterexample_trace(n=60, f=None):
    """``x^t = (2 + f(t), f(t))`` with ``f > 0`` decreasing to 0: converges to
    the solution of Example 1 without ever reaching its manifold."""
    f = (lambda t: 2.0 ** (-t)) if f is None else f
    return [np.array([2.0 + f(t), f(t)]) for t in range(n)]


def counterexample_residuals(n=60):
    """Minimum-norm subgradient of the unit-metric model along the scripted
    trace; it tends to ``(0, 0.4)`` in norm, bounded away from 0."""
    prob = example1()
    xs = counterexample_trace(n + 1)
    out = []
    for t in range(n):
        model = QuadraticModel(xs[t], prob.smooth.grad(xs[t]), ScaledIdentity(2), prob.reg)
        out.append(model.residual_min_norm(xs[t + 1] - xs[t]))
    return np.array(out)


# ---------------------------------------------------------------------- rates


def qlinear_factor(alpha, h_norm, zeta, gamma, eta):
    """Upper bound on ``delta_{t+1} / delta_t`` under quadratic growth."""
    z2 = zeta * zeta
    if z2 <= h_norm:
        branch = z2 / (2.0 * h_norm)
    else:
        branch = 1.0 - h_norm / (2.0 * z2)
    return 1.0 - (1.0 - eta) * alpha * gamma * branch


def noise_floor(f_star):
    return 1e3 * np.finfo(float).eps * max(1.0, abs(f_star))


def audit_qlinear(report, instance, gamma, eta_default=None):
    """Per first-stage step, ``delta_{t+1}/delta_t`` against the Q-linear bound."""
    zeta = instance.spec.sharpness[0]
    f_star = instance.f_star
    floor = noise_floor(f_star)
    out = []
    tr = report.trace
    for t in range(len(tr) - 1):
        nxt = tr[t + 1]
        if nxt.stage != "first":
            continue
        d0 = tr[t].objective - f_star
        d1 = nxt.objective - f_star
        if d0 <= floor:
            continue
        eta = nxt.eta if nxt.eta is not None else eta_default
        if eta is None:
            raise ValueError("achieved eta unknown; run with measure_eta")
        bound = qlinear_factor(nxt.alpha, nxt.h_norm, zeta, gamma, eta)
        out.append(RateVerdict("qlinear", f"{instance.problem.name}@{t}", d1 / d0, bound))
    return out


def audit_weak_sharp(report, instance, gamma, eta=0.0):
    """Contraction ``1 - (1 - eta) alpha gamma / 2`` once the early phase is over."""
    f_star = instance.f_star
    floor = noise_floor(f_star)
    out = []
    tr = report.trace
    for t in range(len(tr) - 1):
        d0 = tr[t].objective - f_star
        if d0 <= floor:
            continue
        d1 = tr[t + 1].objective - f_star
        bound = 1.0 - (1.0 - eta) * tr[t + 1].alpha * gamma / 2.0
        out.append(RateVerdict("weak_sharp", f"{instance.problem.name}@{t}", d1 / d0, bound))
    return out


def loglog_slope(ts, deltas):
    ts = np.asarray(ts, dtype=float)
    ds = np.asarray(deltas, dtype=float)
    A = np.column_stack([np.log(ts), np.ones_like(ts)])
    coef, *_ = np.linalg.lstsq(A, np.log(ds), rcond=None)
    return float(coef[0])


def audit_sublinear(deltas, theta, window=(0.25, 1.0), tolerance=0.25, instance="trace"):
    """Fit ``log delta_t`` against ``log t`` over the tail window and compare
    with ``-1 / (1 - 2 theta)``."""
    deltas = np.asarray(deltas, dtype=float)
    n = deltas.size
    lo = max(1, int(window[0] * n))
    hi = int(window[1] * n)
    ts = np.arange(lo, hi)
    keep = deltas[ts] > 0
    slope = loglog_slope(ts[keep], deltas[ts][keep])
    target = -1.0 / (1.0 - 2.0 * theta)
    rel = abs(slope - target) / abs(target)
    return RateVerdict("sublinear_slope", instance, rel, tolerance), slope


def stage_two_pairs(points, stages, x_star, pairs=3, noise=None):
    """Error pairs ``(e_t, e_{t+2})`` with steps ``t+1`` and ``t+2`` in the
    second stage, ``e_t < 1`` and ``e_{t+2}`` above the rounding floor
    ``noise`` (default ``100 eps max(1, ||x*||)``).  The last ``pairs`` are
    returned together with the full error sequence."""
    x_star = np.asarray(x_star, dtype=float)
    if noise is None:
        noise = 100.0 * np.finfo(float).eps * max(1.0, float(np.linalg.norm(x_star)))
    errs = [float(np.linalg.norm(np.asarray(x) - x_star)) for x in points]
    second = {"pg", "mo"}
    cand = []
    for t in range(len(errs) - 2):
        if stages[t + 1] in second and stages[t + 2] in second and errs[t] < 1.0 and errs[t + 2] > noise:
            cand.append((t, errs[t], errs[t + 2]))
    return cand[-pairs:], errs


def two_step_exponent(pairs):
    """Least-squares slope through the origin of ``log e_{t+2}`` on ``log e_t``."""
    a = np.log([p[1] for p in pairs])
    b = np.log([p[2] for p in pairs])
    return float(a @ b / (a @ a))


def audit_superlinear(report, instance, rho, min_exponent=None, pairs=3):
    """Two-step exponent over the final ``pairs`` second-stage pairs.

    Returns ``None`` when the trace has fewer usable pairs (the run reached
    the rounding floor too quickly to measure anything).
    """
    if min_exponent is None:
        min_exponent = 1.0 + rho - 0.1
    pts = [r.x for r in report.trace]
    if any(x is None for x in pts):
        raise ValueError("trace has no points; run with record_points=True")
    got, _ = stage_two_pairs(pts, [r.stage for r in report.trace], instance.x_star, pairs)
    if len(got) < pairs:
        return None
    return RateVerdict("two_step_superlinear", instance.problem.name, two_step_exponent(got),
                       min_exponent, sense="ge")


def audit_structure(report):
    """Non-MO iteration indices ``k_t`` satisfy ``k_t <= 2 t``; first-stage
    steps use unit step size; the objective never increases."""
    out = []
    name = "trace"
    steps = [r.stage for r in report.trace[1:]]
    ks = [i for i, s in enumerate(steps) if s not in ("mo", "mo_fail")]
    for t, k in enumerate(ks):
        out.append(RateVerdict("k_t_le_2t", f"{name}@{t}", k, 2 * t))
    for i in range(len(steps) - 1):
        both = steps[i] in ("mo", "mo_fail") and steps[i + 1] in ("mo", "mo_fail")
        out.append(RateVerdict("no_consecutive_mo", f"{name}@{i}", float(both), 0.0))
    for r in report.trace[1:]:
        if r.stage == "first":
            out.append(RateVerdict("unit_step", f"{name}@{r.iteration}", r.alpha, 1.0, sense="ge"))
    obj = [r.objective for r in report.trace]
    for i in range(len(obj) - 1):
        out.append(RateVerdict("monotone", f"{name}@{i}", obj[i + 1] - obj[i], 0.0))
    return out


def audit_rates(report, instance, config):
    """Rate audits appropriate for the instance's sharpness exponent, plus the
    structural checks."""
    theta = instance.spec.sharpness[1]
    out = audit_structure(report)
    if theta == 0.5 and not math.isnan(instance.spec.sharpness[0]):
        out += audit_qlinear(report, instance, config.gamma, eta_default=0.0 if config.subsolver == "exact" else None)
    elif theta == 1.0:
        out += audit_weak_sharp(report, instance, config.gamma)
    elif theta < 0.5:
        deltas = [r.objective - instance.f_star for r in report.trace]
        out.append(audit_sublinear(deltas, theta, instance=instance.problem.name)[0])
    return out


# --------------------------------------------------------------------- suites


def suite_inequalities(seed=0, n_instances=200, samples=10):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n_instances):
        model = random_subproblem(int(rng.integers(2**63 - 1)))
        orc = solve_oracle(model)
        ps = sample_directions(model, orc.p, samples, rng)
        out += audit_inequalities(model, ps, orc.p, instance=f"sub{i}")
    return out


def suite_identification(seed=0, n_instances=20, dimension=30, subsolvers=("pg", "apg", "rpcd", "sparsa"),
                         builtin=None):
    out = []
    if builtin == "example1" or builtin is None:
        inst = example1_instance()
        for sub in subsolvers:
            rep = run(inst.problem, OuterConfig(subsolver=sub, tol=1e-12, max_outer=25, seed=seed),
                      x0=inst.x0)
            v = audit_identification(rep.trace, inst.x_star)
            out.append(RateVerdict("identified", f"example1/{sub}", float(not v.identified), 0.0))
        v = audit_identification(counterexample_trace(), inst.x_star)
        out.append(RateVerdict("counterexample_never_identifies", "example1/scripted",
                               float(v.first_iteration is not None), 0.0))
        if builtin == "example1":
            return out
    for sub in subsolvers:
        for i in range(n_instances):
            inst = gen_instance(SyntheticSpec("random_strongly_convex_l1", dimension, 1.0, seed * 1000 + i))
            rep = run(inst.problem, OuterConfig(subsolver=sub, T=5, tol=1e-10, max_outer=500, seed=seed))
            same = rep.final_pattern == inst.support
            out.append(RateVerdict("final_support", f"{inst.problem.name}/{sub}", float(not same), 0.0))
    return out


def suite_rates(seed=0, n_instances=5, dimension=20):
    out = []
    for i in range(n_instances):
        inst = gen_instance(SyntheticSpec("random_strongly_convex_l1", dimension, 1.0, seed * 1000 + i))
        cfg = OuterConfig(hessian_kind="fixed", fixed_hessian=ScaledIdentity(dimension), subsolver="exact",
                          S=math.inf, tol=1e-12, max_outer=300)
        rep = run(inst.problem, cfg, fstar=inst.f_star)
        out += audit_rates(rep, inst, cfg)
    return out


def suite_superlinear(seed=0, n_instances=10, dimension=30, rhos=(0.5, 1.0), min_exponents=None):
    """Two-step exponent on random strongly convex instances.

    The run starts at distance 0.9 from x* on its support, with L-BFGS and
    ``S=1`` so that the second stage begins far enough from x* to leave
    several pairs above the rounding floor.  Runs that reach the floor too
    fast are not measurable; at least half must be.
    """
    min_exponents = {} if min_exponents is None else dict(min_exponents)
    out = []
    for rho in rhos:
        measured = 0
        for i in range(n_instances):
            inst = gen_instance(SyntheticSpec("random_strongly_convex_l1", dimension, 1.0, seed * 1000 + i,
                                              params={"cond": 100.0, "start_offset": 0.9}))
            cfg = OuterConfig(hessian_kind="lbfgs", S=1, tol=0.0, max_outer=60, newton_rho=rho,
                              record_points=True, seed=seed)
            rep = run(inst.problem, cfg, x0=inst.x0)
            v = audit_superlinear(rep, inst, rho, min_exponents.get(rho))
            if v is not None:
                v.instance = f"{v.instance}/rho={rho}"
                out.append(v)
                measured += 1
        out.append(RateVerdict("measurable_fraction", f"rho={rho}", measured / n_instances, 0.5, sense="ge"))
    return out


def suite_sublinear(seed=0, n_instances=3, dimension=10, max_outer=2000):
    """Log-log slope of the objective gap on quartic-valley instances
    (sharpness exponent 1/4), first stage only."""
    out = []
    for i in range(n_instances):
        inst = gen_instance(SyntheticSpec("degenerate_psd_l1", dimension, 0.0, seed * 1000 + i))
        cfg = OuterConfig(hessian_kind="lbfgs", S=math.inf, tol=0.0, max_outer=max_outer, seed=seed)
        rep = run(inst.problem, cfg, fstar=inst.f_star, x0=inst.x0)
        deltas = [r.objective - inst.f_star for r in rep.trace]
        v, _ = audit_sublinear(deltas, inst.spec.sharpness[1], instance=inst.problem.name)
        out.append(v)
        out += audit_structure(rep)
    return out


SUITES = {
    "inequalities": suite_inequalities,
    "identification": suite_identification,
    "rates": suite_rates,
    "superlinear": suite_superlinear,
    "sublinear": suite_sublinear,
}
