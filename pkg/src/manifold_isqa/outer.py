"""Outer iterations: line-search ISQA and the two-stage ISQA+ with
manifold identification."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, asdict
from typing import Callable, List, Optional

import numpy as np

from .hessian import ENLARGEMENT_VARIANTS, DampedNewtonOperator, Enlarger, LbfgsOperator
from .model import QuadraticModel, StopCriterion
from .newton import Chart, TssnConfig, tssn_step
from .regularizer import SupportPattern
from .subsolvers import SUBSOLVERS, SubsolverBudget, solve, solve_oracle

HESSIAN_KINDS = ("lbfgs", "newton", "fixed")
ALGORITHMS = ("isqa", "isqa_plus")
STAGES = ("init", "first", "pg", "mo", "mo_fail")

ARMIJO_MAX_TRIALS = 50
ENLARGE_MARGIN = 10
ENLARGE_HARD_CAP = 200


class LineSearchError(RuntimeError):
    pass


class EnlargementAbort(RuntimeError):
    """The unit step still fails after more enlargements than the worst-case bound."""


@dataclass
class OuterConfig:
    gamma: float = 1e-4
    beta: float = 0.5
    T: int = 5
    S: float = 10
    tol: float = 1e-8
    max_outer: int = 1000
    max_seconds: float = math.inf
    hessian_kind: str = "lbfgs"
    subsolver: str = "rpcd"
    enlargement: str = "doubling"
    algorithm: str = "isqa_plus"
    inner_max: Optional[int] = None
    inner_criterion: Optional[StopCriterion] = None
    seed: int = 0
    lbfgs_memory: int = 10
    lbfgs_delta: float = 1e-10
    newton_c: float = 1e-6
    newton_rho: float = 0.5
    pcg_initial_budget: int = 5
    l_hat: Optional[float] = None
    fixed_hessian: Optional[object] = None
    measure_eta: bool = False
    record_points: bool = False

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if not self.S >= 1:
            raise ValueError("S must be >= 1")
        if self.tol < 0:
            raise ValueError("tol must be nonnegative")
        if self.max_outer < 0:
            raise ValueError("max_outer must be nonnegative")
        if self.hessian_kind not in HESSIAN_KINDS:
            raise ValueError(f"unknown hessian kind {self.hessian_kind!r}")
        if self.hessian_kind == "fixed" and self.fixed_hessian is None:
            raise ValueError("hessian_kind 'fixed' needs fixed_hessian")
        if self.subsolver not in SUBSOLVERS:
            raise ValueError(f"unknown subsolver {self.subsolver!r}")
        if self.enlargement not in ENLARGEMENT_VARIANTS:
            raise ValueError(f"unknown enlargement variant {self.enlargement!r}")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.inner_max is not None and self.inner_max < self.T:
            raise ValueError("inner_max must be >= T")

    @property
    def tssn(self):
        return TssnConfig(
            c=self.newton_c,
            rho=self.newton_rho,
            beta=self.beta,
            gamma=self.gamma,
            pcg_initial_budget=self.pcg_initial_budget,
        )

    def to_dict(self):
        d = asdict(self)
        d.pop("fixed_hessian")
        if self.inner_criterion is not None:
            d["inner_criterion"] = asdict(self.inner_criterion)
        for k in ("S", "max_seconds"):
            if math.isinf(d[k]):
                d[k] = "inf"
        return d


@dataclass
class SolveState:
    x: np.ndarray
    f_val: float
    psi_val: float
    grad: np.ndarray
    l_hat: float
    stage: str = "first"
    unchanged: int = 0
    smooth_step_flag: bool = False
    pattern: Optional[SupportPattern] = None
    last_pattern: Optional[SupportPattern] = None
    iteration: int = 0
    pcg_budget: int = 5
    lbfgs: Optional[LbfgsOperator] = None
    # F(x) advanced by cancellation-free differences, so rounding never
    # makes an accepted step look like an increase
    objective: float = math.nan

    def __post_init__(self):
        if math.isnan(self.objective):
            self.objective = self.f_val + self.psi_val


@dataclass
class TraceRecord:
    iteration: int
    wall_seconds: float
    objective: float
    rel_gap: Optional[float]
    nnz: int
    stage: str
    alpha: float
    prox_grad_norm: float
    inner_iters: int
    enlargements: int
    q_hat: Optional[float] = None
    h_norm: Optional[float] = None
    eta: Optional[float] = None
    note: str = ""
    pattern: Optional[SupportPattern] = None
    x: Optional[np.ndarray] = None


@dataclass
class SolveReport:
    x: np.ndarray
    objective: float
    reason: str
    iterations: int
    trace: List[TraceRecord]
    fstar: Optional[float] = None
    final_pattern: Optional[SupportPattern] = None
    info: dict = field(default_factory=dict)

    @property
    def patterns(self):
        return [r.pattern for r in self.trace]

    def prox_grad_norm(self):
        return self.trace[-1].prox_grad_norm


def rel_gap(f, fstar):
    if fstar is None:
        return None
    scale = abs(fstar) if fstar != 0 else 1.0
    return (f - fstar) / scale


def armijo_search(F, x, p, q_hat, gamma, beta, f_x=None, max_trials=ARMIJO_MAX_TRIALS,
                  change=None):
    """Largest ``alpha`` in ``{1, beta, beta^2, ...}`` with
    ``F(x + alpha p) <= F(x) + gamma alpha q_hat``.

    ``change(x, d)``, if given, returns ``F(x + d) - F(x)`` directly and is
    used instead of differencing two calls of ``F``.  Returns
    ``(alpha, trials)``; raises :class:`LineSearchError` after
    ``max_trials`` rejections.
    """
    if not q_hat < 0:
        raise ValueError(f"Armijo search needs a model decrease q_hat < 0, got {q_hat!r}")
    if change is None:
        if f_x is None:
            f_x = F(x)

        def change(x, d):
            return F(x + d) - f_x

    alpha = 1.0
    for trial in range(1, max_trials + 1):
        if change(x, alpha * p) <= gamma * alpha * q_hat:
            return alpha, trial
        alpha *= beta
    raise LineSearchError(f"no acceptable step after {max_trials} trials")


def identity_prox_grad_norm(problem, x, grad):
    """``||G||`` with ``G = prox_Psi(x - grad) - x``, the termination measure."""
    return float(np.linalg.norm(problem.prox_grad_map(x, grad, 1.0)))


def init_state(problem, config, x0=None):
    x = np.zeros(problem.dim) if x0 is None else np.array(x0, dtype=float)
    if x.shape != (problem.dim,):
        raise ValueError("x0 has the wrong dimension")
    f, g = problem.smooth.value_grad(x)
    l_hat = config.l_hat if config.l_hat is not None else problem.smooth.lipschitz_upper()
    lbfgs = None
    if config.hessian_kind == "lbfgs":
        lbfgs = LbfgsOperator(problem.dim, config.lbfgs_memory, config.lbfgs_delta)
    return SolveState(
        x=x,
        f_val=float(f),
        psi_val=problem.reg.value(x),
        grad=g,
        l_hat=float(l_hat),
        pattern=problem.reg.manifold(x),
        pcg_budget=config.pcg_initial_budget,
        lbfgs=lbfgs,
    )


def _build_hessian(problem, state, config):
    if config.hessian_kind == "newton":
        return DampedNewtonOperator.at(
            problem, state.x, state.grad, c=config.newton_c, rho=config.newton_rho
        )
    if config.hessian_kind == "lbfgs":
        return state.lbfgs.copy()
    return config.fixed_hessian


def _move(problem, state, x_new, change=None):
    """Move the state to ``x_new``, refreshing values and the L-BFGS memory."""
    if change is None:
        change = problem.objective_change(state.x, x_new - state.x)
    state.objective += change
    f, g = problem.smooth.value_grad(x_new)
    psi = problem.reg.value(x_new)
    if state.lbfgs is not None:
        s = x_new - state.x
        if np.any(s != 0.0):
            state.lbfgs.update(s, g - state.grad)
    state.x = x_new
    state.f_val = float(f)
    state.psi_val = psi
    state.grad = g
    state.pattern = problem.reg.manifold(x_new)


def _inner_budget(config, iteration):
    return SubsolverBudget(
        min_iterations=config.T,
        max_iterations=config.inner_max if config.inner_max is not None else config.T,
        criterion=config.inner_criterion,
        rng_seed=int(np.random.SeedSequence([config.seed, iteration]).generate_state(1)[0]),
    )


def _measure_eta(model, q_hat):
    q_star = solve_oracle(model).q_value
    if q_star >= 0.0:
        return 0.0
    return max(q_hat - q_star, 0.0) / (-q_star)


@dataclass
class StepInfo:
    stage: str
    alpha: float
    inner_iters: int = 0
    enlargements: int = 0
    q_hat: Optional[float] = None
    h_norm: Optional[float] = None
    eta: Optional[float] = None
    note: str = ""
    stationary: bool = False


def isqa_step(problem, state, config):
    """Line-search step: subsolve, Armijo backtracking, ``x <- x + alpha p``."""
    H = _build_hessian(problem, state, config)
    model = QuadraticModel(state.x, state.grad, H, problem.reg, state.psi_val)
    res = solve(model, config.subsolver, _inner_budget(config, state.iteration))
    info = StepInfo("first", 0.0, res.iterations, 0, res.q_value, H.norm_bound())
    if not res.q_value < 0:
        info.stationary = True
        return info
    if config.measure_eta:
        info.eta = _measure_eta(model, res.q_value)
    alpha, _ = armijo_search(
        problem.objective, state.x, res.p, res.q_value, config.gamma, config.beta,
        change=problem.objective_change,
    )
    info.alpha = alpha
    _move(problem, state, state.x + alpha * res.p)
    return info


def first_stage_step(problem, state, config):
    """Unit step; enlarge ``H`` and re-solve until the sufficient decrease holds."""
    H0 = _build_hessian(problem, state, config)
    enl = Enlarger(H0, config.enlargement, config.beta)
    bound = enl.round_bound(state.l_hat, H0.lower_bound())
    limit = min(bound, ENLARGE_HARD_CAP) + ENLARGE_MARGIN
    budget = _inner_budget(config, state.iteration)
    inner = 0
    while True:
        model = QuadraticModel(state.x, state.grad, enl.current, problem.reg, state.psi_val)
        res = solve(model, config.subsolver, budget)
        inner += res.iterations
        if not res.q_value < 0:
            return StepInfo("first", 0.0, inner, enl.rounds, res.q_value,
                            enl.current.norm_bound(), stationary=True)
        change = problem.objective_change(state.x, res.p)
        if change <= config.gamma * res.q_value:
            break
        if enl.rounds >= limit:
            raise EnlargementAbort(
                f"unit step rejected after {enl.rounds} enlargements (bound {bound}); "
                "the Lipschitz estimate or curvature bounds are inconsistent"
            )
        enl.enlarge()
    info = StepInfo("first", 1.0, inner, enl.rounds, res.q_value, enl.current.norm_bound())
    if config.measure_eta:
        info.eta = _measure_eta(model, res.q_value)
    _move(problem, state, state.x + res.p, change)
    return info


def pg_safeguard_step(problem, state):
    """``x <- prox_{Psi / L}(x - grad / L)`` with ``L = l_hat``."""
    step = 1.0 / state.l_hat
    x_new = problem.reg.prox(state.x - step * state.grad, step)
    _move(problem, state, x_new)
    return StepInfo("pg", 1.0)


def isqa_plus_step(problem, state, config):
    pattern = state.pattern
    if state.last_pattern is not None:
        if pattern == state.last_pattern:
            state.unchanged += 1
        else:
            state.unchanged = 0
    state.last_pattern = pattern
    if state.unchanged < config.S:
        state.stage = "first"
        state.smooth_step_flag = False
        return first_stage_step(problem, state, config)
    state.stage = "second"
    if state.smooth_step_flag:
        state.smooth_step_flag = False
        return pg_safeguard_step(problem, state)
    tssn = config.tssn
    res = tssn_step(
        problem, state.x, tssn, state.pcg_budget, grad_full=state.grad, chart=Chart.at(state.x),
    )
    n_free = int(np.count_nonzero(state.x))
    if not res.success:
        state.unchanged = 0
        state.pcg_budget = tssn.pcg_initial_budget
        return StepInfo("mo_fail", 0.0, res.pcg_iterations, note=res.reason)
    state.pcg_budget = tssn.next_budget(state.pcg_budget, res.alpha, n_free)
    if res.reason != "stationary":
        _move(problem, state, res.x, res.change)
    if res.alpha < 1.0:
        state.unchanged = 0
    else:
        state.smooth_step_flag = True
    return StepInfo("mo", res.alpha, res.pcg_iterations, note=res.reason)


def run(problem, config=None, fstar=None, x0=None, callback: Optional[Callable] = None):
    """Iterate until ``||G_t|| <= tol`` or a budget runs out."""
    config = OuterConfig() if config is None else config
    state = init_state(problem, config, x0)
    start = time.perf_counter()
    trace: List[TraceRecord] = []

    def record(info):
        gnorm = identity_prox_grad_norm(problem, state.x, state.grad)
        rec = TraceRecord(
            iteration=state.iteration,
            wall_seconds=time.perf_counter() - start,
            objective=state.objective,
            rel_gap=rel_gap(state.objective, fstar),
            nnz=int(np.count_nonzero(state.x)),
            stage=info.stage,
            alpha=info.alpha,
            prox_grad_norm=gnorm,
            inner_iters=info.inner_iters,
            enlargements=info.enlargements,
            q_hat=info.q_hat,
            h_norm=info.h_norm,
            eta=info.eta,
            note=info.note,
            pattern=state.pattern,
            x=state.x.copy() if config.record_points else None,
        )
        trace.append(rec)
        if callback is not None:
            callback(rec)
        return gnorm

    gnorm = record(StepInfo("init", 0.0))
    reason = None
    step_fn = isqa_plus_step if config.algorithm == "isqa_plus" else isqa_step
    while reason is None:
        if gnorm <= config.tol:
            reason = "converged"
            break
        if state.iteration >= config.max_outer:
            reason = "max_outer"
            break
        if time.perf_counter() - start >= config.max_seconds:
            reason = "max_seconds"
            break
        try:
            info = step_fn(problem, state, config)
        except EnlargementAbort as exc:
            reason = "enlargement_abort"
            abort_msg = str(exc)
            break
        except LineSearchError:
            reason = "line_search_failed"
            break
        if info.stationary:
            reason = "stationary"
            break
        state.iteration += 1
        gnorm = record(info)
    report = SolveReport(
        x=state.x,
        objective=state.objective,
        reason=reason,
        iterations=state.iteration,
        trace=trace,
        fstar=fstar,
        final_pattern=state.pattern,
    )
    if reason == "enlargement_abort":
        report.info["abort"] = abort_msg
    report.info["residual"] = problem.stationarity(state.x, state.grad)
    return report
