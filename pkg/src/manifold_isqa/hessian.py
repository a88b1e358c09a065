"""Symmetric PSD operators used as the quadratic-model metric ``H_t``.

Every operator answers four queries: ``apply``, ``diagonal``, and the bound
pair ``norm_bound() >= ||H||``, ``lower_bound() <= lambda_min(H)``.  The
coordinate workspace gives coordinate descent O(1)-ish access to
``(H p)_i`` while ``p`` changes one entry at a time.
"""

from __future__ import annotations

import math
from collections import deque

import numpy as np
from scipy import linalg as sla

_BOUND_SLACK = 1e-12


class HessianOperator:
    dim: int

    def apply(self, v):
        raise NotImplementedError

    def diagonal(self):
        raise NotImplementedError

    def norm_bound(self):
        raise NotImplementedError

    def lower_bound(self):
        raise NotImplementedError

    def coordinate_workspace(self, p):
        return _ApplyWorkspace(self, p)

    def to_dense(self):
        """Materialize the operator; a test oracle for small ``dim`` only."""
        eye = np.eye(self.dim)
        cols = [self.apply(eye[:, j]) for j in range(self.dim)]
        return np.column_stack(cols) if cols else np.zeros((0, 0))


class CoordinateWorkspace:
    """Tracks ``p`` and answers ``(H p)_i`` under single-coordinate updates."""

    def __init__(self, p):
        self.p = np.array(p, dtype=float)

    def hp(self, i):
        raise NotImplementedError

    def set(self, i, value):
        raise NotImplementedError


class _ApplyWorkspace(CoordinateWorkspace):
    # generic fallback: keeps H p and refreshes it through a dense column
    def __init__(self, op, p):
        super().__init__(p)
        self._op = op
        self._hp = op.apply(self.p)
        self._eye = np.zeros(op.dim)

    def hp(self, i):
        return self._hp[i]

    def set(self, i, value):
        delta = value - self.p[i]
        if delta == 0.0:
            return
        self._eye[i] = 1.0
        self._hp += delta * self._op.apply(self._eye)
        self._eye[i] = 0.0
        self.p[i] = value


class ScaledIdentity(HessianOperator):
    """``H = h I``."""

    def __init__(self, dim, scale=1.0):
        if not scale > 0:
            raise ValueError("scale must be positive")
        self.dim = int(dim)
        self.scale = float(scale)

    def apply(self, v):
        return self.scale * np.asarray(v, dtype=float)

    def diagonal(self):
        return np.full(self.dim, self.scale)

    def norm_bound(self):
        return self.scale

    def lower_bound(self):
        return self.scale

    def coordinate_workspace(self, p):
        return _IdentityWorkspace(self.scale, p)


class _IdentityWorkspace(CoordinateWorkspace):
    def __init__(self, scale, p):
        super().__init__(p)
        self._scale = scale

    def hp(self, i):
        return self._scale * self.p[i]

    def set(self, i, value):
        self.p[i] = value


class DenseOperator(HessianOperator):
    """Explicit symmetric matrix; bounds are the exact extreme eigenvalues."""

    def __init__(self, matrix):
        mat = np.array(matrix, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError("matrix must be square")
        self.matrix = 0.5 * (mat + mat.T)
        self.dim = mat.shape[0]
        self._eig = None

    def _extremes(self):
        if self._eig is None:
            if self.dim == 0:
                self._eig = (0.0, 0.0)
            else:
                ev = np.linalg.eigvalsh(self.matrix)
                self._eig = (float(ev[0]), float(ev[-1]))
        return self._eig

    def apply(self, v):
        return self.matrix @ np.asarray(v, dtype=float)

    def diagonal(self):
        return np.diag(self.matrix).copy()

    def norm_bound(self):
        return self._extremes()[1] * (1.0 + _BOUND_SLACK)

    def lower_bound(self):
        return max(self._extremes()[0] * (1.0 - _BOUND_SLACK), 0.0)

    def coordinate_workspace(self, p):
        return _DenseWorkspace(self.matrix, p)

    def to_dense(self):
        return self.matrix.copy()


class _DenseWorkspace(CoordinateWorkspace):
    def __init__(self, matrix, p):
        super().__init__(p)
        self._m = matrix
        self._hp = matrix @ self.p

    def hp(self, i):
        return self._hp[i]

    def set(self, i, value):
        delta = value - self.p[i]
        if delta != 0.0:
            self._hp += delta * self._m[:, i]
            self.p[i] = value


class LogisticCurvature(HessianOperator):
    """Generalized Hessian ``A^T diag(w) A`` of the logistic loss."""

    def __init__(self, csr, csc, weights, gram_norm_bound):
        self._csr = csr
        self._csc = csc
        self.weights = np.asarray(weights, dtype=float)
        self.dim = csr.shape[1]
        self._gram_bound = float(gram_norm_bound)

    def apply(self, v):
        return self._csr.T @ (self.weights * (self._csr @ np.asarray(v, dtype=float)))

    def diagonal(self):
        sq = self._csr.multiply(self._csr)
        return np.asarray(sq.T @ self.weights).ravel()

    def norm_bound(self):
        wmax = float(self.weights.max()) if self.weights.size else 0.0
        return wmax * self._gram_bound

    def lower_bound(self):
        return 0.0

    def coordinate_workspace(self, p):
        return _LogisticWorkspace(self, p)


class _LogisticWorkspace(CoordinateWorkspace):
    # caches A p so that (A^T W A p)_i costs one column of A
    def __init__(self, op, p):
        super().__init__(p)
        csc = op._csc
        self._indptr = csc.indptr
        self._indices = csc.indices
        self._data = csc.data
        self._w = op.weights
        self._ap = op._csr @ self.p

    def hp(self, i):
        lo, hi = self._indptr[i], self._indptr[i + 1]
        rows = self._indices[lo:hi]
        return float(self._data[lo:hi] @ (self._w[rows] * self._ap[rows]))

    def set(self, i, value):
        delta = value - self.p[i]
        if delta != 0.0:
            lo, hi = self._indptr[i], self._indptr[i + 1]
            self._ap[self._indices[lo:hi]] += delta * self._data[lo:hi]
            self.p[i] = value


class ShiftedScaledOperator(HessianOperator):
    """``scale * base + shift * I``; realizes damping and enlargement."""

    def __init__(self, base, scale=1.0, shift=0.0):
        if not scale > 0 or shift < 0:
            raise ValueError("need scale > 0 and shift >= 0")
        self.base = base
        self.scale = float(scale)
        self.shift = float(shift)
        self.dim = base.dim

    def apply(self, v):
        v = np.asarray(v, dtype=float)
        out = self.scale * self.base.apply(v)
        if self.shift:
            out += self.shift * v
        return out

    def diagonal(self):
        return self.scale * self.base.diagonal() + self.shift

    def norm_bound(self):
        return self.scale * self.base.norm_bound() + self.shift

    def lower_bound(self):
        return self.scale * self.base.lower_bound() + self.shift

    def coordinate_workspace(self, p):
        return _ShiftedWorkspace(self.base.coordinate_workspace(p), self.scale, self.shift)

    def to_dense(self):
        return self.scale * self.base.to_dense() + self.shift * np.eye(self.dim)


class _ShiftedWorkspace(CoordinateWorkspace):
    def __init__(self, inner, scale, shift):
        self._inner = inner
        self._scale = scale
        self._shift = shift

    @property
    def p(self):
        return self._inner.p

    def hp(self, i):
        return self._scale * self._inner.hp(i) + self._shift * self._inner.p[i]

    def set(self, i, value):
        self._inner.set(i, value)


class DampedNewtonOperator(ShiftedScaledOperator):
    """``H = curvature(x) + damping * I`` with ``damping = c ||x - prox(x - grad)||^rho``."""

    def __init__(self, curvature, damping, c=1e-6, rho=0.5):
        if damping < 0:
            raise ValueError("damping must be nonnegative")
        super().__init__(curvature, 1.0, damping)
        self.damping = float(damping)
        self.c = c
        self.rho = rho

    @classmethod
    def at(cls, problem, x, grad=None, c=1e-6, rho=0.5):
        """Build the operator for composite ``problem`` at ``x``."""
        if grad is None:
            grad = problem.smooth.grad(x)
        step = x - problem.reg.prox(x - grad, 1.0)
        damping = c * float(np.linalg.norm(step)) ** rho
        return cls(problem.smooth.curvature(x), damping, c=c, rho=rho)


class LbfgsOperator(HessianOperator):
    """Limited-memory BFGS Hessian approximation in compact form.

    ``B = gamma I - W N^{-1} W^T`` with ``W = [gamma S, Y]`` and
    ``N = [[gamma S^T S, L], [L^T, -D]]``.  Pairs are accepted only when
    ``<s, y> > delta <s, s>``.
    """

    def __init__(self, dim, memory=10, delta=1e-10):
        if memory < 1:
            raise ValueError("memory must be >= 1")
        self.dim = int(dim)
        self.memory = int(memory)
        self.delta = float(delta)
        self.pairs = deque(maxlen=self.memory)
        self.gamma = 1.0
        self.rejected = 0
        self._w = None
        self._wm = None
        self._bounds = None

    def __len__(self):
        return len(self.pairs)

    def copy(self):
        other = LbfgsOperator(self.dim, self.memory, self.delta)
        other.pairs = deque(self.pairs, maxlen=self.memory)
        other.gamma = self.gamma
        other.rejected = self.rejected
        other._w, other._wm, other._bounds = self._w, self._wm, self._bounds
        other._ninv = getattr(self, "_ninv", None)
        return other

    def update(self, s, y):
        s = np.array(s, dtype=float)
        y = np.array(y, dtype=float)
        sy = float(s @ y)
        if not sy > self.delta * float(s @ s):
            self.rejected += 1
            return False
        self.pairs.append((s, y))
        self.gamma = float(y @ y) / sy
        self._rebuild()
        return True

    def _rebuild(self):
        S = np.column_stack([s for s, _ in self.pairs])
        Y = np.column_stack([y for _, y in self.pairs])
        g = self.gamma
        SY = S.T @ Y
        L = np.tril(SY, k=-1)
        D = np.diag(np.diag(SY))
        N = np.block([[g * (S.T @ S), L], [L.T, -D]])
        W = np.hstack([g * S, Y])
        Ninv = np.linalg.inv(N)
        self._w = W
        self._wm = W @ Ninv
        self._ninv = Ninv
        self._bounds = None

    def apply(self, v):
        v = np.asarray(v, dtype=float)
        if not self.pairs:
            return self.gamma * v
        return self.gamma * v - self._wm @ (self._w.T @ v)

    def diagonal(self):
        if not self.pairs:
            return np.full(self.dim, self.gamma)
        return self.gamma - np.einsum("ij,ij->i", self._wm, self._w)

    def _extremes(self):
        if self._bounds is None:
            if not self.pairs:
                self._bounds = (self.gamma, self.gamma)
            else:
                # H acts as gamma off range(W); on range(W) it is a small dense matrix
                Q, R = np.linalg.qr(self._w, mode="reduced")
                small = self.gamma * np.eye(R.shape[0]) - R @ self._ninv @ R.T
                ev = sla.eigvalsh(0.5 * (small + small.T))
                lo, hi = float(ev[0]), float(ev[-1])
                if Q.shape[1] < self.dim:
                    lo, hi = min(lo, self.gamma), max(hi, self.gamma)
                self._bounds = (lo, hi)
        return self._bounds

    def norm_bound(self):
        return self._extremes()[1] * (1.0 + _BOUND_SLACK)

    def lower_bound(self):
        return max(self._extremes()[0] * (1.0 - _BOUND_SLACK), 0.0)

    def coordinate_workspace(self, p):
        if not self.pairs:
            return _IdentityWorkspace(self.gamma, p)
        return _LbfgsWorkspace(self, p)


class _LbfgsWorkspace(CoordinateWorkspace):
    # keeps u = W^T p so (Hp)_i = gamma p_i - (W N^-1)[i] . u
    def __init__(self, op, p):
        super().__init__(p)
        self._g = op.gamma
        self._w = op._w
        self._wm = op._wm
        self._u = self._w.T @ self.p

    def hp(self, i):
        return self._g * self.p[i] - float(self._wm[i] @ self._u)

    def set(self, i, value):
        delta = value - self.p[i]
        if delta != 0.0:
            self._u += delta * self._w[i]
            self.p[i] = value


def dense_bfgs(pairs, gamma):
    """Reference BFGS recursion from ``gamma I``; test oracle for the compact form."""
    d = len(pairs[0][0]) if pairs else 0
    B = gamma * np.eye(d)
    for s, y in pairs:
        Bs = B @ s
        B = B - np.outer(Bs, Bs) / (s @ Bs) + np.outer(y, y) / (y @ s)
    return B


ENLARGEMENT_VARIANTS = ("doubling", "variant1", "variant2")


class Enlarger:
    """Enlarges ``H0`` when the unit step fails the Armijo test.

    ``variant1``: ``sigma <- beta sigma, H <- H0 / sigma``.
    ``variant2``: ``H <- H0 + I / sigma, sigma <- beta sigma``.
    ``doubling``: ``H <- 2 H`` (``variant1`` with ``beta = 1/2``).
    """

    def __init__(self, base, variant="doubling", beta=0.5):
        if variant not in ENLARGEMENT_VARIANTS:
            raise ValueError(f"unknown enlargement variant {variant!r}")
        if not 0 < beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        self.base = base
        self.variant = variant
        self.beta = 0.5 if variant == "doubling" else float(beta)
        self.sigma = 1.0
        self.rounds = 0
        self.current = base

    def enlarge(self):
        if self.variant == "variant2":
            self.current = ShiftedScaledOperator(self.base, 1.0, 1.0 / self.sigma)
            self.sigma *= self.beta
        else:
            self.sigma *= self.beta
            self.current = ShiftedScaledOperator(self.base, 1.0 / self.sigma, 0.0)
        self.rounds += 1
        return self.current

    def round_bound(self, lipschitz, m0):
        """Worst-case number of enlargements before the unit step is accepted."""
        inv = 1.0 / self.beta
        if self.variant == "variant2":
            return 1 + max(0, math.ceil(math.log(max(lipschitz, 1e-300)) / math.log(inv)))
        if m0 <= 0:
            return math.inf
        return max(0, math.ceil(math.log(lipschitz / m0) / math.log(inv)))
