"""Dense numerical kernels shared by the solvers.

SVD helpers, row normalization, Householder deflation for projection
pursuit, and exponential-time brute-force oracles for the l2->l1 and
linf->l1 operator norms on small instances.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.sparse.linalg import svds

from .exceptions import (
    DegenerateRowError,
    InvalidArgumentError,
    InvalidInputError,
    ResourceLimitError,
)

RANK_RTOL = 1e-12
BRUTEFORCE_MAX_N = 25
_CHUNK = 1 << 15


def as_data_matrix(X, name="X"):
    """Validate and return ``X`` as a finite 2-D float64 array."""
    A = np.asarray(X, dtype=np.float64)
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2:
        raise InvalidInputError(f"{name} must be a 2-D array, got shape {A.shape}")
    if A.shape[0] < 1 or A.shape[1] < 1:
        raise InvalidInputError(f"{name} must have at least one row and column")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError(f"{name} contains NaN or Inf entries")
    return A


def _as_unit_vector(v, dim, tol, name="v"):
    v = np.asarray(v, dtype=np.float64).ravel()
    if v.shape[0] != dim:
        raise InvalidArgumentError(f"{name} has length {v.shape[0]}, expected {dim}")
    nrm = np.linalg.norm(v)
    if not np.isfinite(nrm) or abs(nrm - 1.0) > tol:
        raise InvalidArgumentError(f"{name} must have unit norm (got {nrm!r})")
    return v


class SvdTriple(NamedTuple):
    """Compact SVD ``A = U @ diag(sigma) @ V.T``."""

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray

    @property
    def rank(self):
        return self.sigma.shape[0]

    def reconstruct(self):
        return (self.U * self.sigma) @ self.V.T


def _empty_triple(m, n):
    return SvdTriple(np.zeros((m, 0)), np.zeros(0), np.zeros((n, 0)))


def compact_svd(A, rtol=RANK_RTOL):
    """Rank-revealing compact SVD.

    Singular values at or below ``rtol * sigma_1`` are discarded, so the
    returned factors have exactly ``r`` columns with ``sigma > 0``. The zero
    matrix yields an empty triple.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise InvalidInputError("compact_svd expects a 2-D array")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError("compact_svd input contains NaN or Inf")
    m, n = A.shape
    if m == 0 or n == 0:
        return _empty_triple(m, n)
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return _empty_triple(m, n)
    r = int(np.count_nonzero(s > rtol * s[0]))
    return SvdTriple(U[:, :r], s[:r], Vt[:r].T)


def truncated_svd(A, r, rtol=RANK_RTOL, method="auto"):
    """Leading ``r`` singular triplets of ``A``.

    ``method`` is ``"dense"`` (full SVD then truncate), ``"arpack"`` (Lanczos
    via :func:`scipy.sparse.linalg.svds`) or ``"auto"``, which uses ARPACK
    only when ``r`` is small relative to the matrix. Fewer than ``r`` triplets
    come back when the numerical rank is lower.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise InvalidInputError("truncated_svd expects a 2-D array")
    m, n = A.shape
    kmax = min(m, n)
    if not 1 <= int(r) <= kmax:
        raise InvalidArgumentError(f"r must lie in [1, {kmax}], got {r}")
    r = int(r)
    if method == "auto":
        method = "arpack" if (kmax >= 100 and 4 * r < kmax) else "dense"
    if method == "dense":
        full = compact_svd(A, rtol=rtol)
        k = min(r, full.rank)
        return SvdTriple(full.U[:, :k], full.sigma[:k], full.V[:, :k])
    if method != "arpack":
        raise InvalidArgumentError(f"unknown truncated_svd method {method!r}")
    if r >= kmax:
        return truncated_svd(A, r, rtol=rtol, method="dense")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError("truncated_svd input contains NaN or Inf")
    # deterministic start vector keeps ARPACK reproducible
    v0 = np.ones(kmax) / np.sqrt(kmax)
    U, s, Vt = svds(A, k=r, tol=0, v0=v0, which="LM")
    order = np.argsort(s)[::-1]
    U, s, Vt = U[:, order], s[order], Vt[order]
    if s[0] == 0.0:
        return _empty_triple(m, n)
    keep = s > rtol * s[0]
    return SvdTriple(U[:, keep], s[keep], Vt[keep].T)


def row_normalize(A, tol=1e-12):
    """Scale every row of ``A`` to unit Euclidean norm.

    Raises :class:`DegenerateRowError` naming the first row whose norm does
    not exceed ``tol``.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise InvalidInputError("row_normalize expects a 2-D array")
    norms = np.linalg.norm(A, axis=1)
    bad = np.flatnonzero(~(norms > tol))
    if bad.size:
        raise DegenerateRowError(bad[0], norms[bad[0]])
    return A / norms[:, None]


def row_norms(A):
    return np.linalg.norm(np.asarray(A, dtype=np.float64), axis=1)


def nuclear_norm(A):
    """Sum of singular values."""
    A = np.asarray(A, dtype=np.float64)
    if A.size == 0:
        return 0.0
    return float(np.linalg.svd(A, compute_uv=False).sum())


def row_sparsity_norm(A):
    """Sum of the Euclidean norms of the rows."""
    return float(row_norms(A).sum())


# ---------------------------------------------------------------------------
# Householder deflation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HouseholderStack:
    """Reflectors accumulated by successive deflations.

    ``reflectors[j]`` is the unit vector ``u`` of ``H = I - 2 u u^T`` acting on
    the coordinates of the ``j``-th deflated matrix (length ``p - j``).
    """

    reflectors: tuple = field(default_factory=tuple)

    @property
    def depth(self):
        return len(self.reflectors)

    def current_dim(self, p):
        return p - self.depth

    def push(self, u):
        return HouseholderStack(self.reflectors + (np.array(u, dtype=np.float64),))


def _reflector_for(v):
    # maps v to -sign(v_1) e_1; the sign choice avoids cancellation
    u = v.copy()
    s = 1.0 if v[0] >= 0 else -1.0
    u[0] += s
    return u / np.linalg.norm(u)


def householder_reduce(X, v, stack=None, tol=1e-10):
    """Restrict the rows of ``X`` to the orthogonal complement of ``v``.

    Returns the ``n x (p-1)`` matrix of coordinates in a basis of
    ``v``'s complement together with the extended reflector stack. ``v`` must
    be expressed in the current (already reduced) coordinates of ``X``.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise InvalidInputError("X must be 2-D")
    p = X.shape[1]
    v = _as_unit_vector(v, p, tol)
    stack = HouseholderStack() if stack is None else stack
    u = _reflector_for(v)
    XH = X - 2.0 * np.outer(X @ u, u)
    return XH[:, 1:], stack.push(u)


def lift_component(v_reduced, stack, tol=1e-10):
    """Map a vector from deflated coordinates back to the original space."""
    w = np.asarray(v_reduced, dtype=np.float64).ravel()
    if stack.depth == 0:
        return w.copy()
    for u in reversed(stack.reflectors):
        if u.shape[0] != w.shape[0] + 1:
            raise InvalidArgumentError(
                f"stack reflector of length {u.shape[0]} cannot lift a "
                f"vector of length {w.shape[0]}"
            )
        z = np.concatenate(([0.0], w))
        w = z - 2.0 * u * (u @ z)
    return w


# ---------------------------------------------------------------------------
# Brute-force operator norms
# ---------------------------------------------------------------------------


def _sign_chunks(n):
    """Yield blocks of sign vectors in {+-1}^n with the first entry fixed to +1."""
    total = 1 << (n - 1)
    shifts = np.arange(n - 1, dtype=np.int64)
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        bits = (idx[:, None] >> shifts) & 1
        Y = np.empty((idx.size, n))
        Y[:, 0] = 1.0
        Y[:, 1:] = 1.0 - 2.0 * bits
        yield Y


def _check_bruteforce_size(n, max_n):
    if n > max_n:
        raise ResourceLimitError(
            f"brute-force enumeration over 2^{n - 1} sign vectors exceeds the limit n <= {max_n}"
        )


def norm_inf_to_1_bruteforce(M, max_n=BRUTEFORCE_MAX_N):
    """max over y in {+-1}^n of y^T M y, by enumeration.

    Equals the linf->l1 norm when ``M`` is positive semidefinite; for
    indefinite ``M`` the maximum need not sit on a sign vector and this
    function only returns the sign-vector maximum.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidInputError("M must be square")
    if not np.all(np.isfinite(M)):
        raise InvalidInputError("M contains NaN or Inf")
    scale = max(np.abs(M).max(), 1.0)
    if np.abs(M - M.T).max() > 1e-10 * scale:
        raise InvalidArgumentError("M must be symmetric")
    n = M.shape[0]
    _check_bruteforce_size(n, max_n)
    best = -np.inf
    for Y in _sign_chunks(n):
        vals = np.einsum("ij,ij->i", Y @ M, Y)
        best = max(best, float(vals.max()))
    return max(best, 0.0)


def norm_2to1_bruteforce(X, max_n=BRUTEFORCE_MAX_N):
    """Exact l2->l1 operator norm max_{|v|_2=1} |Xv|_1.

    Uses the dual form max_{w in {+-1}^n} |X^T w|_2, enumerated directly on
    ``X`` (never forming X X^T), so it is an independent route from
    :func:`norm_inf_to_1_bruteforce`.
    """
    X = as_data_matrix(X)
    n = X.shape[0]
    _check_bruteforce_size(n, max_n)
    best = 0.0
    for Y in _sign_chunks(n):
        Z = Y @ X
        best = max(best, float(np.einsum("ij,ij->i", Z, Z).max()))
    return float(np.sqrt(best))


def l1_of_projection(X, v, tol=1e-8):
    """Mean absolute deviation scale of the projection: sum_i |<x_i, v>|."""
    X = as_data_matrix(X)
    v = _as_unit_vector(v, X.shape[1], tol)
    return float(np.abs(X @ v).sum())


# ---------------------------------------------------------------------------
# Component container
# ---------------------------------------------------------------------------


def orient_columns(V):
    """Flip column signs so each column's largest-magnitude entry is positive."""
    V = np.array(V, dtype=np.float64, copy=True)
    if V.ndim == 1:
        V = V[:, None]
    for j in range(V.shape[1]):
        i = int(np.argmax(np.abs(V[:, j])))
        if V[i, j] < 0:
            V[:, j] = -V[:, j]
    return V


@dataclass(frozen=True)
class ComponentSet:
    """``p x T`` matrix of orthonormal robust components."""

    V: np.ndarray
    method_tag: str
    extras: dict = field(default_factory=dict)

    @property
    def T(self):
        return self.V.shape[1]

    def __getitem__(self, j):
        return self.V[:, j]

    def orthonormality_error(self):
        return float(np.abs(self.V.T @ self.V - np.eye(self.T)).max())
