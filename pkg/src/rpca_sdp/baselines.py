"""Comparison methods: classical PCA, spherical PCA and N+L1."""

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .core import (
    ComponentSet,
    as_data_matrix,
    nuclear_norm,
    row_norms,
)
from .exceptions import InvalidArgumentError, InvalidInputError
from .lld import LldOptions, almm, top_right_singular_vectors

logger = logging.getLogger(__name__)


def pca_components(X, T):
    """Top ``T`` right singular vectors of ``X`` (uncentered PCA)."""
    X = as_data_matrix(X)
    if T < 1:
        raise InvalidArgumentError("T must be at least 1")
    return ComponentSet(V=top_right_singular_vectors(X, T, rtol=1e-12), method_tag="pca")


def sph_components(X, T):
    """Spherical PCA: PCA of the row-normalized data.

    Zero rows carry no direction and are dropped with a warning.
    """
    X = as_data_matrix(X)
    norms = row_norms(X)
    keep = norms > 1e-12 * max(float(norms.max()), 1e-300)
    if not keep.any():
        raise InvalidInputError("spherical PCA needs at least one nonzero row")
    if not keep.all():
        logger.warning("sph_components: dropping %d zero row(s)", int((~keep).sum()))
    Xn = X[keep] / norms[keep, None]
    comps = pca_components(Xn, T)
    return ComponentSet(V=comps.V, method_tag="sph", extras={"dropped_rows": np.flatnonzero(~keep)})


def shrink_entries(A, nu):
    """Entrywise soft threshold ``sign(a) max(|a| - nu, 0)``."""
    if nu < 0:
        raise InvalidArgumentError("nu must be nonnegative")
    A = np.asarray(A, dtype=np.float64)
    return np.sign(A) * np.maximum(np.abs(A) - nu, 0.0)


@dataclass
class Nl1Result:
    L: np.ndarray
    S: np.ndarray
    Q: np.ndarray
    lam: float
    mu: float
    iterations: int
    final_residual: float
    objective: float
    residual_history: list = field(default_factory=list)


def default_lambda(n):
    return 1.0 / np.sqrt(n)


def nl1_objective(L, S, lam):
    return nuclear_norm(L) + lam * float(np.abs(S).sum())


def nl1_solve(X, lam=None, opts=None, **kwargs):
    """Low-rank plus entrywise-sparse split ``X = L + S``.

    Minimizes ``||L||_* + lam * sum |S_ij|`` with the same ALMM scheme,
    penalty and stopping rule as :func:`rpca_sdp.lld.lld_solve`.
    """
    X = as_data_matrix(X)
    lam = default_lambda(X.shape[0]) if lam is None else float(lam)
    if not lam > 0:
        raise InvalidArgumentError("lambda must be positive")
    if not np.any(X):
        raise InvalidArgumentError("X must be nonzero")
    opts = opts or LldOptions()
    if kwargs:
        opts = replace(opts, **kwargs)
    L, S, Q, mu, it, residual, rh, _ = almm(X, lam, shrink_entries, opts, "nl1_solve")
    return Nl1Result(
        L=L,
        S=S,
        Q=Q,
        lam=lam,
        mu=mu,
        iterations=it,
        final_residual=residual,
        objective=nl1_objective(L, S, lam),
        residual_history=rh,
    )


def nl1_components(X, lam=None, T=1, opts=None, **kwargs):
    """Top ``T`` right singular vectors of the low-rank part of N+L1."""
    res = nl1_solve(X, lam, opts, **kwargs)
    V = top_right_singular_vectors(res.L, T)
    return ComponentSet(V=V, method_tag="nl1", extras={"result": res})
