"""Truncated semismooth Newton steps on the l1 active manifold.

The chart of a point ``x`` is the coordinate subspace of its nonzeros;
on it ``lam * ||x||_1`` is linear, so the reduced problem is smooth.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class ChartDegenerateError(ValueError):
    """A free coordinate of the chart point is exactly zero."""


@dataclass(frozen=True)
class Chart:
    free_indices: np.ndarray
    dim: int
    base_signs: np.ndarray
    ambient_dim: int

    @classmethod
    def at(cls, x):
        x = np.asarray(x, dtype=float)
        free = np.flatnonzero(x != 0.0)
        return cls(free, int(free.size), np.sign(x[free]), int(x.size))

    def restrict(self, x):
        return np.asarray(x, dtype=float)[self.free_indices]

    def embed(self, y):
        x = np.zeros(self.ambient_dim)
        x[self.free_indices] = y
        return x


@dataclass(frozen=True)
class TssnConfig:
    c: float = 1e-6
    rho: float = 0.5
    beta: float = 0.5
    gamma: float = 1e-4
    alpha_floor: Optional[float] = None
    pcg_initial_budget: int = 5
    forcing: float = 0.1

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("c must be positive")
        if not 0 < self.rho <= 1:
            raise ValueError("rho must lie in (0, 1]")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if self.alpha_floor is not None and not 0 < self.alpha_floor < 1:
            raise ValueError("alpha_floor must lie in (0, 1)")
        if self.pcg_initial_budget < 1:
            raise ValueError("pcg_initial_budget must be >= 1")

    @property
    def floor(self):
        return self.beta**20 if self.alpha_floor is None else self.alpha_floor

    def next_budget(self, budget, alpha, dim):
        """PCG iteration budget for the next MO step."""
        if alpha == 1.0:
            return min(2 * budget, max(dim, self.pcg_initial_budget))
        return self.pcg_initial_budget


def _check_chart_point(y):
    if np.any(y == 0.0):
        raise ChartDegenerateError("chart point has a zero free coordinate")


def chart_gradient(problem, chart, y, grad_full=None):
    """Gradient of ``F`` restricted to the chart at ``y``; signs come from ``y``."""
    y = np.asarray(y, dtype=float)
    _check_chart_point(y)
    if grad_full is None:
        grad_full = problem.smooth.grad(chart.embed(y))
    return grad_full[chart.free_indices] + problem.reg.smooth_gradient_on_manifold(
        y, slice(None)
    )


def damping(g, c, rho):
    return c * float(np.linalg.norm(g)) ** rho


class ReducedHessian:
    """``v -> (hess f(embed y) embed v)[free] + mu v``."""

    def __init__(self, problem, chart, y, mu):
        self.chart = chart
        self.mu = float(mu)
        self._op = problem.smooth.curvature(chart.embed(y))

    def apply(self, v):
        return self._op.apply(self.chart.embed(v))[self.chart.free_indices] + self.mu * v

    def diagonal(self):
        return self._op.diagonal()[self.chart.free_indices] + self.mu


def reduced_hess_vec(problem, chart, y, v, mu=0.0):
    return ReducedHessian(problem, chart, y, mu).apply(np.asarray(v, dtype=float))


def pcg_tolerance(g, rho, forcing=0.1):
    gn = float(np.linalg.norm(g))
    return forcing * min(gn, gn ** (1.0 + rho))


@dataclass
class PcgResult:
    q: np.ndarray
    iterations: int
    residual: float
    converged: bool
    negative_curvature: bool = False


def pcg(apply, g, precond, tol, max_iterations):
    """Preconditioned CG for ``H q = -g`` from ``q = 0``.

    Stops once ``||H q + g|| <= tol`` (checked on the true residual) or the
    budget runs out.  Nonpositive curvature returns the current iterate.
    """
    g = np.asarray(g, dtype=float)
    q = np.zeros_like(g)
    r = -g.copy()
    rnorm = float(np.linalg.norm(r))
    if rnorm <= tol:
        return PcgResult(q, 0, rnorm, True)
    minv = 1.0 / np.asarray(precond, dtype=float)
    z = minv * r
    d = z.copy()
    rz = float(r @ z)
    it = 0
    while it < max_iterations:
        it += 1
        hd = apply(d)
        curv = float(d @ hd)
        if curv <= 0.0:
            res = float(np.linalg.norm(apply(q) + g))
            return PcgResult(q, it, res, False, True)
        a = rz / curv
        q = q + a * d
        r = r - a * hd
        if float(np.linalg.norm(r)) <= tol:
            r = -g - apply(q)
            rnorm = float(np.linalg.norm(r))
            if rnorm <= tol:
                return PcgResult(q, it, rnorm, True)
        z = minv * r
        rz_new = float(r @ z)
        d = z + (rz_new / rz) * d
        rz = rz_new
    rnorm = float(np.linalg.norm(apply(q) + g))
    return PcgResult(q, it, rnorm, rnorm <= tol)


@dataclass
class TssnResult:
    success: bool
    x: np.ndarray
    change: float
    alpha: float
    reason: str
    pcg_iterations: int = 0
    g_norm: float = 0.0
    mu: float = 0.0
    info: dict = field(default_factory=dict)


def tssn_step(problem, x, config=None, pcg_budget=None, grad_full=None, chart=None):
    """One manifold-optimization step from ``x``.

    On failure ``x`` is returned unchanged with ``success=False``.
    Nonincrease of ``F`` (ties included) is the acceptance rule; ``change``
    is ``F(x_new) - F(x)``.
    """
    config = TssnConfig() if config is None else config
    x = np.asarray(x, dtype=float)
    if chart is None:
        chart = Chart.at(x)
    budget = config.pcg_initial_budget if pcg_budget is None else int(pcg_budget)
    y = chart.restrict(x)
    try:
        g = chart_gradient(problem, chart, y, grad_full)
    except ChartDegenerateError:
        return TssnResult(False, x, 0.0, 0.0, "chart_degenerate")
    gn = float(np.linalg.norm(g))
    if gn == 0.0:
        return TssnResult(True, x, 0.0, 1.0, "stationary", 0, 0.0, 0.0)
    mu = damping(g, config.c, config.rho)
    H = ReducedHessian(problem, chart, y, mu)
    tol = pcg_tolerance(g, config.rho, config.forcing)
    sol = pcg(H.apply, g, H.diagonal(), tol, budget)
    q = sol.q
    info = {"pcg_residual": sol.residual, "pcg_converged": sol.converged,
            "negative_curvature": sol.negative_curvature, "q_norm": float(np.linalg.norm(q)),
            "pcg_tol": tol}
    if float(q @ g) >= 0.0:
        return TssnResult(False, x, 0.0, 0.0, "non_descent", sol.iterations, gn, mu, info)
    alpha = 1.0
    floor = config.floor
    while True:
        x_new = chart.embed(y + alpha * q)
        change = problem.objective_change(x, x_new - x)
        if not change > 0.0:
            break
        if not alpha > floor:
            break
        alpha *= config.beta
    if alpha <= floor:
        return TssnResult(False, x, 0.0, alpha, "tiny_step", sol.iterations, gn, mu, info)
    return TssnResult(True, x_new, change, alpha, "accepted", sol.iterations, gn, mu, info)
