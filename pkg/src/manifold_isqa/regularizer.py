"""Nonsmooth regularizers: value, proximal maps, stationarity, active manifold.

Only the l1 norm ships.  The :class:`Regularizer` base documents the
operations the solvers rely on so that block-separable regularizers can be
added without touching the outer loop.
"""

from __future__ import annotations

import numpy as np


class SupportPattern:
    """Zero set ``I_x = {i : x_i == 0}`` of a point, i.e. the l1 active manifold.

    Equality is exact membership equality; two patterns of different
    dimension are never equal.
    """

    __slots__ = ("_mask",)

    def __init__(self, zero_mask):
        mask = np.asarray(zero_mask, dtype=bool).copy()
        mask.setflags(write=False)
        self._mask = mask

    @classmethod
    def from_zero_set(cls, zero_set, dimension):
        idx = np.asarray(zero_set, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= dimension):
            raise ValueError("zero_set index out of range")
        mask = np.zeros(dimension, dtype=bool)
        mask[idx] = True
        return cls(mask)

    @property
    def mask(self):
        return self._mask

    @property
    def dimension(self):
        return self._mask.size

    @property
    def zero_set(self):
        return np.flatnonzero(self._mask)

    @property
    def free_indices(self):
        return np.flatnonzero(~self._mask)

    @property
    def nnz(self):
        return int(self._mask.size - np.count_nonzero(self._mask))

    def __eq__(self, other):
        if not isinstance(other, SupportPattern):
            return NotImplemented
        return self.dimension == other.dimension and bool(np.array_equal(self._mask, other._mask))

    def __hash__(self):
        return hash((self.dimension, self._mask.tobytes()))

    def __repr__(self):
        zs = self.zero_set
        shown = zs[:8].tolist()
        more = "..." if zs.size > 8 else ""
        return f"SupportPattern(dimension={self.dimension}, zero_set={shown}{more})"


def manifold_of(x):
    """Active l1 manifold of ``x``: exact zeros, no tolerance."""
    return SupportPattern(np.asarray(x) == 0.0)


class Regularizer:
    """Interface of a convex, prox-friendly regularizer ``Psi``."""

    def value(self, x):
        raise NotImplementedError

    def value_change(self, x, p):
        """``Psi(x + p) - Psi(x)``."""
        return self.value(x + p) - self.value(x)

    def prox(self, v, tau):
        """argmin_y  ||y - v||^2 / (2 tau) + Psi(y)."""
        raise NotImplementedError

    def prox_diag(self, v, diag):
        """Prox in the metric ``diag(diag)``."""
        raise NotImplementedError

    def stationarity_residual(self, x, g):
        """dist(0, g + dPsi(x))."""
        raise NotImplementedError

    def manifold(self, x):
        raise NotImplementedError

    def smooth_gradient_on_manifold(self, x, free):
        """Gradient of Psi restricted to its smooth manifold through ``x``."""
        raise NotImplementedError


def soft_threshold(v, thresh):
    return np.sign(v) * np.maximum(np.abs(v) - thresh, 0.0)


class L1Regularizer(Regularizer):
    """``Psi(x) = lam * ||x||_1``."""

    def __init__(self, lam):
        lam = float(lam)
        if not (lam > 0.0 and np.isfinite(lam)):
            raise ValueError(f"lambda must be positive and finite, got {lam!r}")
        self.lam = lam

    def __repr__(self):
        return f"L1Regularizer(lam={self.lam!r})"

    def value(self, x):
        return self.lam * float(np.sum(np.abs(x)))

    def value_change(self, x, p):
        # coordinatewise, and exact (sign * p) where the sign does not change
        x = np.asarray(x, dtype=float)
        p = np.asarray(p, dtype=float)
        s0 = np.sign(x)
        same = (s0 == np.sign(x + p)) & (s0 != 0.0)
        diff = np.where(same, s0 * p, np.abs(x + p) - np.abs(x))
        return self.lam * float(np.sum(diff))

    def prox(self, v, tau):
        if not tau > 0.0:
            raise ValueError(f"prox step must be positive, got {tau!r}")
        return soft_threshold(np.asarray(v, dtype=float), tau * self.lam)

    def prox_diag(self, v, diag):
        diag = np.asarray(diag, dtype=float)
        if np.any(diag <= 0.0):
            raise ValueError("prox metric must be positive definite")
        return soft_threshold(np.asarray(v, dtype=float), self.lam / diag)

    def residual_vector(self, x, g):
        """Minimum-norm element of ``g + lam * d||x||_1`` (coordinatewise)."""
        x = np.asarray(x, dtype=float)
        g = np.asarray(g, dtype=float)
        r = g + self.lam * np.sign(x)
        zero = x == 0.0
        r[zero] = soft_threshold(g[zero], self.lam)
        return r

    def stationarity_residual(self, x, g):
        return float(np.linalg.norm(self.residual_vector(x, g)))

    def manifold(self, x):
        return manifold_of(x)

    def smooth_gradient_on_manifold(self, x, free):
        return self.lam * np.sign(np.asarray(x)[free])


def psi_value(reg, x):
    return reg.value(x)


def stationarity_residual(reg, x, g):
    return reg.stationarity_residual(x, g)
