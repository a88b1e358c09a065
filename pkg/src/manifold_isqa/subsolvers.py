"""Inner solvers for the quadratic subproblem.

All solvers start from ``p = 0`` (so ``Q(0) = 0``), are monotone in ``Q``
and end on the output of a proximal step.  The diagnostics record that
last step as ``metric`` (scalar or per-coordinate) and ``pre_prox``, the
direction the step was taken from.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .model import StopCriterion, check_stop

SUBSOLVERS = ("pg", "apg", "rpcd", "sparsa", "exact")


@dataclass
class SubsolverBudget:
    min_iterations: int = 5
    max_iterations: int = 5
    criterion: Optional[StopCriterion] = None
    rng_seed: int = 0

    def __post_init__(self):
        if self.min_iterations < 1:
            raise ValueError("min_iterations must be >= 1")
        if self.max_iterations < self.min_iterations:
            raise ValueError("max_iterations must be >= min_iterations")


@dataclass
class SubsolverResult:
    p: np.ndarray
    iterations: int
    q_value: float
    diagnostics: dict = field(default_factory=dict)


def _done(model, budget, it, p, hp):
    if it < budget.min_iterations:
        return False
    if it >= budget.max_iterations:
        return True
    if budget.criterion is None:
        return False
    return check_stop(model, p, budget.criterion, hp=hp)


def solve_pg(model, budget):
    """Proximal gradient with the fixed step ``1 / M_hat``."""
    tau = 1.0 / model.M_hat
    H = model.hess
    p = np.zeros(model.dim)
    hp = np.zeros(model.dim)
    q = 0.0
    q_hist = [0.0]
    it = 0
    pre = p
    while True:
        it += 1
        pre = p
        p = model.prox_grad_step(p, tau, hp)
        hp = H.apply(p)
        q = model.q_value(p, hp)
        q_hist.append(q)
        if _done(model, budget, it, p, hp):
            break
    return SubsolverResult(
        p, it, q, {"kind": "pg", "metric": 1.0 / tau, "pre_prox": pre, "q_history": q_hist}
    )


def solve_apg(model, budget, restart=True):
    """Accelerated proximal gradient with constant momentum
    ``1 - 2 / (sqrt(kappa) + 1)``, ``kappa = M_hat / m_hat``, and
    function-value restart."""
    M = model.M_hat
    m = model.m_hat
    kappa = M / m if m > 0 else np.inf
    theta = 1.0 - 2.0 / (np.sqrt(kappa) + 1.0)
    tau = 1.0 / M
    H = model.hess
    x_prev = np.zeros(model.dim)
    x_cur = np.zeros(model.dim)
    hp_cur = np.zeros(model.dim)
    q_cur = 0.0
    q_hist = [0.0]
    restarts = 0
    it = 0
    y = x_cur
    while True:
        it += 1
        y = x_cur + theta * (x_cur - x_prev) if it > 1 else x_cur
        hy = H.apply(y)
        cand = model.prox_grad_step(y, tau, hy)
        hc = H.apply(cand)
        qc = model.q_value(cand, hc)
        if restart and it > 1 and qc >= q_cur:
            restarts += 1
            y = x_cur
            cand = model.prox_grad_step(y, tau, hp_cur)
            hc = H.apply(cand)
            qc = model.q_value(cand, hc)
            x_prev = cand
        else:
            x_prev = x_cur
        x_cur, hp_cur, q_cur = cand, hc, qc
        q_hist.append(qc)
        if _done(model, budget, it, x_cur, hp_cur):
            break
    return SubsolverResult(
        x_cur,
        it,
        q_cur,
        {
            "kind": "apg",
            "metric": M,
            "pre_prox": y,
            "momentum": theta,
            "restarts": restarts,
            "q_history": q_hist,
        },
    )


def solve_rpcd(model, budget, record=False):
    """Cyclic proximal coordinate descent, coordinates reshuffled every epoch.

    Each coordinate step is the exact minimizer of ``Q`` along that
    coordinate.  l1 regularizer only.  ``record`` stores ``Q`` after every
    coordinate step (slow; for testing).
    """
    lam = model.reg.lam
    base = model.base
    grad = model.grad
    diag = model.hess.diagonal()
    ws = model.hess.coordinate_workspace(np.zeros(model.dim))
    rng = np.random.default_rng(budget.rng_seed)
    it = 0
    pre = np.zeros(model.dim)
    coord_q = [0.0]
    while True:
        it += 1
        pre = ws.p.copy()
        for i in rng.permutation(model.dim):
            h = diag[i]
            if h <= 0.0:
                continue
            pi = ws.p[i]
            zi = base[i] + pi
            t = zi - (grad[i] + ws.hp(i)) / h
            thr = lam / h
            if t > thr:
                new_z = t - thr
            elif t < -thr:
                new_z = t + thr
            else:
                new_z = 0.0
            new_p = new_z - base[i]
            if new_p != pi:
                ws.set(i, new_p)
            if record:
                coord_q.append(model.q_value(ws.p))
        p = ws.p.copy()
        if _done(model, budget, it, p, None):
            break
    hp = model.hess.apply(p)
    diag_out = {"kind": "rpcd", "metric": diag, "pre_prox": pre}
    if record:
        diag_out["coordinate_q"] = coord_q
    return SubsolverResult(p, it, model.q_value(p, hp), diag_out)


def solve_sparsa(model, budget):
    """Monotone SpaRSA: Barzilai-Borwein initial steps, halving until ``Q``
    does not increase.  The BB step is clamped to ``[1/(10 M), 10/m]``."""
    M = model.M_hat
    m = model.m_hat
    tau_min = 1.0 / (10.0 * M)
    tau_max = 10.0 / m if m > 0 else np.inf
    H = model.hess
    p = np.zeros(model.dim)
    hp = np.zeros(model.dim)
    q = 0.0
    tau = 1.0 / M
    backtracks = 0
    q_hist = [0.0]
    it = 0
    pre = p
    used_tau = tau
    while True:
        it += 1
        while True:
            cand = model.prox_grad_step(p, tau, hp)
            hc = H.apply(cand)
            qc = model.q_value(cand, hc)
            if qc <= q or tau <= 1.0 / M:
                break
            tau = max(tau / 2.0, 1.0 / M)
            backtracks += 1
        pre, used_tau = p, tau
        dp = cand - p
        dg = hc - hp
        p, hp, q = cand, hc, qc
        q_hist.append(q)
        if _done(model, budget, it, p, hp):
            break
        dgg = float(dg @ dg)
        if dgg > 0.0:
            tau = float(np.clip(float(dp @ dg) / dgg, tau_min, tau_max))
        else:
            tau = 1.0 / M
    return SubsolverResult(
        p,
        it,
        q,
        {
            "kind": "sparsa",
            "metric": 1.0 / used_tau,
            "pre_prox": pre,
            "backtracks": backtracks,
            "q_history": q_hist,
        },
    )


def _polish(model, H, p):
    """Solve the optimality system exactly on the support of ``base + p``."""
    base, g, reg = model.base, model.grad, model.reg
    on = (base + p) != 0.0
    S = np.flatnonzero(on)
    Z = np.flatnonzero(~on)
    pp = -base.copy()
    if S.size:
        sign = np.sign(base[S] + p[S])
        rhs = -g[S] - reg.lam * sign - H[np.ix_(S, Z)] @ pp[Z]
        try:
            pp[S] = np.linalg.solve(H[np.ix_(S, S)], rhs)
        except np.linalg.LinAlgError:
            return None
        if not np.array_equal(np.sign(base[S] + pp[S]), sign):
            return None
    return pp


def solve_oracle(model, max_iterations=10**6, certify=1e-13, polish_every=50):
    """Reference minimizer of the model for small dense problems.

    Proximal gradient with step ``1 / M_hat`` (at most ``max_iterations``
    steps); every ``polish_every`` steps the optimality system is solved
    exactly on the current support, and the run stops once that point has
    a minimum-norm subgradient below ``certify * max(1, ||grad||)``.
    """
    H = model.hess.to_dense()
    g = model.grad
    base = model.base
    reg = model.reg
    tau = 1.0 / model.M_hat
    target = certify * max(1.0, float(np.linalg.norm(g)))
    p = np.zeros(model.dim)
    best, best_r = p, model.residual_min_norm(p, H @ p)
    it = 0
    for it in range(1, max_iterations + 1):
        p = reg.prox(base + p - tau * (g + H @ p), tau) - base
        if it % polish_every == 0 or it == max_iterations:
            r = model.residual_min_norm(p, H @ p)
            if r < best_r:
                best, best_r = p, r
            pp = _polish(model, H, p)
            if pp is not None:
                r = model.residual_min_norm(pp, H @ pp)
                if r < best_r:
                    best, best_r = pp, r
            if best_r <= target:
                break
    return SubsolverResult(
        best,
        it,
        model.q_value(best, H @ best),
        {"kind": "exact", "metric": 1.0 / tau, "pre_prox": best, "residual": best_r},
    )


def solve_exact(model, budget=None):
    return solve_oracle(model)


_DISPATCH = {
    "pg": solve_pg,
    "apg": solve_apg,
    "rpcd": solve_rpcd,
    "sparsa": solve_sparsa,
    "exact": solve_exact,
}


def solve(model, kind, budget):
    try:
        fn = _DISPATCH[kind]
    except KeyError:
        raise ValueError(f"unknown subsolver {kind!r}; choose from {SUBSOLVERS}") from None
    return fn(model, budget)
