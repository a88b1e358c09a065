"""Problem data: sparse design matrices, LIBSVM ingestion, smooth losses.

A composite problem is ``F(x) = f(x) + Psi(x)``.  The smooth part exposes
``value``, ``grad``, ``hess_vec``, ``curvature`` (an operator for the
generalized Hessian at a point) and ``lipschitz_upper``.

Ingestion performs no feature scaling; data sets are used exactly as read.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .hessian import DenseOperator, LogisticCurvature
from .regularizer import L1Regularizer


class LibsvmParseError(ValueError):
    def __init__(self, lineno, message):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True, eq=False)
class SparseDesignMatrix:
    """Row-compressed ``n_rows x n_cols`` matrix of examples ``a_i``."""

    n_rows: int
    n_cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        ro = np.asarray(self.row_offsets, dtype=np.int64)
        ci = np.asarray(self.col_indices, dtype=np.int64)
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "row_offsets", ro)
        object.__setattr__(self, "col_indices", ci)
        object.__setattr__(self, "values", vals)
        if ro.shape != (self.n_rows + 1,):
            raise ValueError("row_offsets must have length n_rows + 1")
        if ro[0] != 0 or ro[-1] != ci.size or np.any(np.diff(ro) < 0):
            raise ValueError("row_offsets must be nondecreasing from 0 to nnz")
        if ci.shape != vals.shape:
            raise ValueError("col_indices and values differ in length")
        if ci.size and (ci.min() < 0 or ci.max() >= self.n_cols):
            raise ValueError("column index out of range")
        if np.any(vals == 0.0):
            raise ValueError("explicit zeros are not stored")
        for r in range(self.n_rows):
            seg = ci[ro[r]:ro[r + 1]]
            if seg.size > 1 and np.any(np.diff(seg) <= 0):
                raise ValueError(f"row {r}: column indices not strictly increasing")

    @classmethod
    def from_scipy(cls, mat):
        csr = sp.csr_matrix(mat, dtype=float)
        csr.eliminate_zeros()
        csr.sort_indices()
        return cls(csr.shape[0], csr.shape[1], csr.indptr, csr.indices, csr.data)

    @classmethod
    def from_dense(cls, arr):
        return cls.from_scipy(sp.csr_matrix(np.atleast_2d(np.asarray(arr, dtype=float))))

    @property
    def shape(self):
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self):
        return int(self.col_indices.size)

    @cached_property
    def csr(self):
        return sp.csr_matrix(
            (self.values, self.col_indices, self.row_offsets), shape=self.shape
        )

    @cached_property
    def csc(self):
        return self.csr.tocsc()

    def row(self, r):
        lo, hi = self.row_offsets[r], self.row_offsets[r + 1]
        return self.col_indices[lo:hi], self.values[lo:hi]

    def subset_rows(self, rows):
        return SparseDesignMatrix.from_scipy(self.csr[np.asarray(rows)])

    def equals(self, other):
        return (
            self.shape == other.shape
            and np.array_equal(self.row_offsets, other.row_offsets)
            and np.array_equal(self.col_indices, other.col_indices)
            and np.array_equal(self.values, other.values)
        )


def _parse_label(tok, lineno):
    try:
        val = float(tok)
    except ValueError:
        raise LibsvmParseError(lineno, f"bad label {tok!r}") from None
    if val not in (1.0, -1.0):
        raise LibsvmParseError(lineno, f"label must be +1 or -1, got {tok!r}")
    return val


def parse_libsvm(data, n_features=None):
    """Parse LIBSVM text (``label idx:val ...``, 1-based indices).

    Returns ``(SparseDesignMatrix, labels)``.  ``n_features`` overrides the
    inferred column count (it may only enlarge it).  Stored zeros are dropped.
    """
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("utf-8")
    offsets = [0]
    cols = []
    vals = []
    labels = []
    max_idx = 0
    for lineno, line in enumerate(io.StringIO(data), start=1):
        toks = line.split()
        if not toks:
            continue
        labels.append(_parse_label(toks[0], lineno))
        prev = 0
        for tok in toks[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise LibsvmParseError(lineno, f"malformed token {tok!r}")
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise LibsvmParseError(lineno, f"malformed token {tok!r}") from None
            if idx < 1:
                raise LibsvmParseError(lineno, f"index must be >= 1, got {idx}")
            if idx <= prev:
                raise LibsvmParseError(lineno, "indices not strictly increasing")
            if not np.isfinite(val):
                raise LibsvmParseError(lineno, f"non-finite value {val_s!r}")
            prev = idx
            max_idx = max(max_idx, idx)
            if val != 0.0:
                cols.append(idx - 1)
                vals.append(val)
        offsets.append(len(cols))
    n_cols = max_idx
    if n_features is not None:
        if n_features < max_idx:
            raise ValueError(f"n_features={n_features} smaller than max index {max_idx}")
        n_cols = int(n_features)
    mat = SparseDesignMatrix(
        len(labels),
        n_cols,
        np.asarray(offsets, dtype=np.int64),
        np.asarray(cols, dtype=np.int64),
        np.asarray(vals, dtype=float),
    )
    return mat, np.asarray(labels, dtype=float)


def serialize_libsvm(matrix, labels):
    """Inverse of :func:`parse_libsvm` (shortest round-trip float repr)."""
    out = []
    for r in range(matrix.n_rows):
        idx, val = matrix.row(r)
        lab = "+1" if labels[r] > 0 else "-1"
        feats = " ".join(f"{i + 1}:{v!r}" for i, v in zip(idx.tolist(), val.tolist()))
        out.append(f"{lab} {feats}".rstrip())
    return ("\n".join(out) + ("\n" if out else "")).encode("utf-8")


def load_libsvm(path, n_features=None, max_rows=None):
    with open(os.fspath(path), "rb") as fh:
        raw = fh.read()
    if max_rows is not None:
        lines = raw.splitlines(keepends=True)
        kept = [ln for ln in lines if ln.strip()][:max_rows]
        raw = b"".join(kept)
    return parse_libsvm(raw, n_features=n_features)


def _logistic_loss(z):
    # log(1 + exp(-z)), branch on sign so exp never overflows
    e = np.exp(-np.abs(z))
    return np.log1p(e) + np.maximum(-z, 0.0)


def _power_iteration_gram(csr, iters=100, seed=0):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(csr.shape[1])
    v /= np.linalg.norm(v)
    est = prev = 0.0
    converged = False
    for _ in range(iters):
        w = csr.T @ (csr @ v)
        est = float(v @ w) / float(v @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0, True
        v = w / nw
        converged = prev > 0 and abs(est - prev) <= 1e-3 * est
        prev = est
    return est, converged


def gram_norm_upper(csr, safety=1.1, iters=100, seed=0):
    """Upper estimate of ``lambda_max(A^T A)``: safeguarded power iteration,
    falling back to ``||A||_F^2`` when the iteration has not settled."""
    if csr.shape[0] == 0 or csr.shape[1] == 0:
        raise ValueError("empty design matrix")
    frob = float(csr.multiply(csr).sum())
    if frob == 0.0:
        raise ValueError("design matrix is identically zero")
    est, converged = _power_iteration_gram(csr, iters=iters, seed=seed)
    if not converged:
        return frob
    return min(safety * est, frob)


class SmoothFunction:
    """Interface of the smooth part ``f``."""

    dim: int

    def value(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError

    def value_grad(self, x):
        return self.value(x), self.grad(x)

    def hess_vec(self, x, v):
        return self.curvature(x).apply(v)

    def value_change(self, x, p):
        """``f(x + p) - f(x)``; subclasses compute it without cancellation."""
        return self.value(x + p) - self.value(x)

    def curvature(self, x):
        raise NotImplementedError

    def lipschitz_upper(self):
        raise NotImplementedError

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"expected a point of dimension {self.dim}, got shape {x.shape}")
        return x


class LogisticLoss(SmoothFunction):
    """``f(x) = sum_i log(1 + exp(-b_i <a_i, x>))``."""

    def __init__(self, matrix, labels):
        labels = np.asarray(labels, dtype=float)
        if labels.shape != (matrix.n_rows,):
            raise ValueError("one label per row required")
        if not np.all(np.isin(labels, (-1.0, 1.0))):
            raise ValueError("labels must be +1 or -1")
        self.matrix = matrix
        self.labels = labels
        self.dim = matrix.n_cols
        self._csr = matrix.csr
        self._lhat = None

    def margins(self, x):
        return self.labels * (self._csr @ self._check(x))

    def value(self, x):
        return float(np.sum(_logistic_loss(self.margins(x))))

    def grad(self, x):
        z = self.margins(x)
        return self._csr.T @ (-self.labels * expit(-z))

    def value_grad(self, x):
        z = self.margins(x)
        return float(np.sum(_logistic_loss(z))), self._csr.T @ (-self.labels * expit(-z))

    def value_change(self, x, p):
        # l(z + d) - l(z) = log1p(sigmoid(-z) expm1(-d)), accurate for small d
        z = self.margins(x)
        d = self.labels * (self._csr @ self._check(p))
        big = np.abs(d) > 30.0
        out = np.empty_like(z)
        ok = ~big
        out[ok] = np.log1p(expit(-z[ok]) * np.expm1(-d[ok]))
        out[big] = _logistic_loss(z[big] + d[big]) - _logistic_loss(z[big])
        return float(np.sum(out))

    def hess_weights(self, x):
        z = self.margins(x)
        return expit(z) * expit(-z)

    def curvature(self, x):
        return LogisticCurvature(
            self._csr, self.matrix.csc, self.hess_weights(x), 4.0 * self.lipschitz_upper()
        )

    def hess_vec(self, x, v):
        v = self._check(v)
        return self._csr.T @ (self.hess_weights(x) * (self._csr @ v))

    def lipschitz_upper(self):
        if self._lhat is None:
            self._lhat = 0.25 * gram_norm_upper(self._csr)
        return self._lhat


class QuadraticFunction(SmoothFunction):
    """``f(x) = 0.5 (x - a)^T P (x - a)`` with symmetric PSD ``P``."""

    def __init__(self, P, a):
        self.P = np.array(P, dtype=float)
        self.a = np.array(a, dtype=float)
        self.dim = self.a.size
        self._op = DenseOperator(self.P)

    @classmethod
    def separable(cls, c, a):
        """``sum_i c_i (x_i - a_i)^2``."""
        return cls(np.diag(2.0 * np.asarray(c, dtype=float)), a)

    def value(self, x):
        r = self._check(x) - self.a
        return 0.5 * float(r @ (self.P @ r))

    def grad(self, x):
        return self.P @ (self._check(x) - self.a)

    def value_change(self, x, p):
        p = self._check(p)
        return float(self.grad(x) @ p) + 0.5 * float(p @ (self.P @ p))

    def curvature(self, x):
        return self._op

    def lipschitz_upper(self):
        return self._op.norm_bound()


class QuarticFunction(SmoothFunction):
    """``0.5 (x-a)^T P (x-a) + 0.25 sum_j w_j <v_j, x - b>^4``.

    With ``P`` singular along the ``v_j`` this grows only quartically in
    those directions (sharpness exponent 1/4).
    """

    def __init__(self, P, a, V, b, w):
        self.P = np.array(P, dtype=float)
        self.a = np.array(a, dtype=float)
        self.V = np.atleast_2d(np.array(V, dtype=float))
        self.b = np.array(b, dtype=float)
        self.w = np.atleast_1d(np.array(w, dtype=float))
        self.dim = self.a.size
        self._L = None

    def value(self, x):
        x = self._check(x)
        r = x - self.a
        t = self.V @ (x - self.b)
        return 0.5 * float(r @ (self.P @ r)) + 0.25 * float(np.sum(self.w * t**4))

    def grad(self, x):
        x = self._check(x)
        t = self.V @ (x - self.b)
        return self.P @ (x - self.a) + self.V.T @ (self.w * t**3)

    def curvature(self, x):
        t = self.V @ (self._check(x) - self.b)
        return DenseOperator(self.P + (self.V.T * (3.0 * self.w * t**2)) @ self.V)

    def lipschitz_upper(self):
        # not globally Lipschitz; a bound on the level set of interest is set by the caller
        if self._L is None:
            raise ValueError("set lipschitz bound explicitly for QuarticFunction")
        return self._L

    def set_lipschitz(self, value):
        self._L = float(value)


@dataclass
class CompositeProblem:
    """``F = smooth + reg``."""

    smooth: SmoothFunction
    reg: object
    name: str = "composite"
    meta: dict = field(default_factory=dict)

    @property
    def dim(self):
        return self.smooth.dim

    def objective(self, x):
        return self.smooth.value(x) + self.reg.value(x)

    def objective_change(self, x, p):
        """``F(x + p) - F(x)`` evaluated without cancellation."""
        return self.smooth.value_change(x, p) + self.reg.value_change(x, p)

    def prox_grad_map(self, x, grad=None, step=1.0):
        """``prox_{step Psi}(x - step grad f(x)) - x``."""
        if grad is None:
            grad = self.smooth.grad(x)
        return self.reg.prox(x - step * grad, step) - x

    def stationarity(self, x, grad=None):
        if grad is None:
            grad = self.smooth.grad(x)
        return self.reg.stationarity_residual(x, grad)


@dataclass
class LogisticProblem:
    """l1-regularized logistic regression data: ``(A, b, lambda)``."""

    matrix: SparseDesignMatrix
    labels: np.ndarray
    lam: float = 1.0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        self.loss = LogisticLoss(self.matrix, self.labels)

    def composite(self, name="logistic"):
        return CompositeProblem(self.loss, L1Regularizer(self.lam), name=name)


def f_value(prob, x):
    return prob.loss.value(x)


def f_grad(prob, x):
    return prob.loss.grad(x)


def hess_vec(prob, x, v):
    return prob.loss.hess_vec(x, v)


def lipschitz_upper(prob):
    return prob.loss.lipschitz_upper()


def example1():
    """``(x1 - 2.5)^2 + (x2 - 0.3)^2 + ||x||_1``; unique solution ``(2, 0)``."""
    smooth = QuadraticFunction.separable([1.0, 1.0], [2.5, 0.3])
    return CompositeProblem(smooth, L1Regularizer(1.0), name="example1")
