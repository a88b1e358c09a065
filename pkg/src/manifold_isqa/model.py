"""The subproblem model ``Q(p) = <g, p> + 0.5 <p, H p> + Psi(x + p) - Psi(x)``
and the inner stopping rules built on it."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

STOP_KINDS = ("objective_gap", "residual_norm", "prox_grad_norm")


class QuadraticModel:
    """Quadratic model around ``base``; immutable once built."""

    def __init__(self, base, grad, hess, reg, psi_base=None):
        self.base = np.asarray(base, dtype=float)
        self.grad = np.asarray(grad, dtype=float)
        self.hess = hess
        self.reg = reg
        self.psi_base = reg.value(self.base) if psi_base is None else float(psi_base)
        self.dim = self.base.size

    @property
    def m_hat(self):
        return self.hess.lower_bound()

    @property
    def M_hat(self):
        return self.hess.norm_bound()

    def q_value(self, p, hp=None):
        p = np.asarray(p, dtype=float)
        if hp is None:
            hp = self.hess.apply(p)
        return (
            float(self.grad @ p)
            + 0.5 * float(p @ hp)
            + self.reg.value_change(self.base, p)
        )

    def q_difference(self, p, p_ref, hp_ref=None):
        """``Q(p) - Q(p_ref)`` without differencing two large values."""
        d = np.asarray(p, dtype=float) - p_ref
        if hp_ref is None:
            hp_ref = self.hess.apply(p_ref)
        return (
            float((self.grad + hp_ref) @ d)
            + 0.5 * float(d @ self.hess.apply(d))
            + self.reg.value_change(self.base + p_ref, d)
        )

    def smooth_grad(self, p, hp=None):
        if hp is None:
            hp = self.hess.apply(p)
        return self.grad + hp

    def prox_grad_step(self, p, tau=None, hp=None):
        """One proximal-gradient step on the model; returns the new direction."""
        if tau is None:
            tau = 1.0 / self.M_hat
        z = self.base + p
        return self.reg.prox(z - tau * self.smooth_grad(p, hp), tau) - self.base

    def prox_grad_norm(self, p, tau=None, hp=None):
        return float(np.linalg.norm(p - self.prox_grad_step(p, tau, hp)))

    def residual_min_norm(self, p, hp=None):
        """Norm of the minimum-norm subgradient of ``Q`` at ``p`` (l1 only)."""
        return self.reg.stationarity_residual(self.base + p, self.smooth_grad(p, hp))


def prox_grad_step(model, p, tau=None):
    return model.prox_grad_step(p, tau)


def residual_min_norm(model, p):
    return model.residual_min_norm(p)


def q_value(model, p):
    return model.q_value(p)


def eb_coefficient(m, M, tau):
    """Coefficient ``c`` in ``G_tau(p)^2 >= c (Q(pbar) - Q*)`` (error bound)."""
    return tau / ((2.0 / m + tau) * (1.0 + M * tau) / tau - 0.5)


@dataclass(frozen=True)
class StopCriterion:
    """Inner stopping rule.

    ``eta`` switches to the multiplicative tolerance ``eps = eta * (-Q*)``,
    certified through ``-Q* >= -Q(p)``.
    """

    kind: str = "prox_grad_norm"
    epsilon: float = 0.0
    eta: Optional[float] = None

    def __post_init__(self):
        if self.kind not in STOP_KINDS:
            raise ValueError(f"unknown stop criterion {self.kind!r}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.eta is not None and not 0.0 <= self.eta < 1.0:
            raise ValueError("eta must lie in [0, 1)")


def certified_gap(model, p, hp=None):
    """Upper bound on ``Q(p) - Q*`` from ``||r||^2 >= 2 m (Q(p) - Q*)``."""
    m = model.m_hat
    r = model.residual_min_norm(p, hp)
    if r == 0.0:
        return 0.0
    if m <= 0.0:
        return np.inf
    return r * r / (2.0 * m)


def certified_gap_after_step(model, p, tau=None, hp=None):
    """Upper bound on ``Q(pbar) - Q*`` for the prox-gradient point ``pbar``."""
    if tau is None:
        tau = 1.0 / model.M_hat
    G = model.prox_grad_norm(p, tau, hp)
    if G == 0.0:
        return 0.0
    m = model.m_hat
    if m <= 0.0:
        return np.inf
    return G * G / eb_coefficient(m, model.M_hat, tau)


def check_stop(model, p, criterion, q_star_bound=None, hp=None):
    """Whether ``p`` satisfies ``criterion`` on ``model``.

    ``q_star_bound`` is an optional known lower bound on ``Q*``; it gives a
    second certified gap ``Q(p) - q_star_bound`` for the objective-gap rule.
    """
    p = np.asarray(p, dtype=float)
    if hp is None:
        hp = model.hess.apply(p)
    eps = criterion.epsilon
    if criterion.eta is not None:
        eps = criterion.eta * max(-model.q_value(p, hp), 0.0)
    if criterion.kind == "residual_norm":
        return model.residual_min_norm(p, hp) <= eps
    if criterion.kind == "prox_grad_norm":
        return model.prox_grad_norm(p, None, hp) <= eps
    gap = certified_gap(model, p, hp)
    if q_star_bound is not None:
        gap = min(gap, model.q_value(p, hp) - q_star_bound)
    return gap <= eps
