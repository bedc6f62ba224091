"""Maximum mean absolute deviation rounding (MDR).

The top MD direction maximizes ``||X v||_1`` over unit ``v``. We solve the
semidefinite relaxation

    maximize trace(X X^T Z)  subject to  Z >= 0, diag(Z) = 1

through a row-normalized low-rank factor ``Z = N(R) N(R)^T``, then round
``R`` to sign vectors ``y = sign(R g)`` with Gaussian ``g`` and map each to
the unit direction ``X^T y / ||X^T y||``. Further components come from
projection pursuit on Householder-deflated data.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .cg import minimize_cg
from .core import (
    ComponentSet,
    HouseholderStack,
    as_data_matrix,
    householder_reduce,
    lift_component,
    orient_columns,
    row_normalize,
)
from .exceptions import (
    ConvergenceError,
    DegenerateRowError,
    DegenerateTrialError,
    InvalidArgumentError,
)

logger = logging.getLogger(__name__)

DEFAULT_TRIALS = 94


def bm_rank(n):
    """Factor width floor((1 + sqrt(9 + 8n)) / 2) for an n-row problem."""
    return int(math.floor((1.0 + math.sqrt(9.0 + 8.0 * n)) / 2.0))


@dataclass(frozen=True)
class CgParams:
    """Controls for the factorization solve.

    ``restarts`` is the number of independent random initializations; the
    best objective wins. ``stall_tol`` is the relative gradient size below
    which a stalled line search is still accepted as converged.
    """

    grad_tol: float = 1e-8
    max_iter: int = 5000
    restarts: int = 1
    stall_tol: float = 1e-5

    def __post_init__(self):
        if not (self.grad_tol > 0 and self.max_iter > 0 and self.restarts > 0):
            raise InvalidArgumentError("CgParams fields must all be positive")


@dataclass
class MdrResult:
    v_star: np.ndarray
    alpha_star: float
    ratio: float
    value: float
    trial_values: np.ndarray
    y_star: np.ndarray
    seed: object
    degenerate_trials: int = 0
    cg_iterations: int = 0

    @property
    def K(self):
        return self.trial_values.shape[0]


# ---------------------------------------------------------------------------
# random streams
# ---------------------------------------------------------------------------


def as_seed_sequence(rng):
    """Coerce an int, ``None``, SeedSequence or Generator to a SeedSequence."""
    if isinstance(rng, np.random.SeedSequence):
        return rng
    if isinstance(rng, np.random.Generator):
        return np.random.SeedSequence(int(rng.integers(2**63)))
    return np.random.SeedSequence(rng)


def child_sequence(ss, i):
    """The ``i``-th child stream of ``ss``, independent of spawn history."""
    return np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + (int(i),))


# ---------------------------------------------------------------------------
# factorization objective and solve
# ---------------------------------------------------------------------------


def bm_objective(R, X):
    """Value ``||X^T N(R)||_F^2`` and its exact gradient with respect to ``R``.

    The gradient of row ``i`` is the projection of ``2 (X X^T N(R))_i`` onto
    the complement of ``r_i``, divided by ``||r_i||``.
    """
    R = np.asarray(R, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    N = row_normalize(R)
    norms = np.linalg.norm(R, axis=1)
    G = X.T @ N
    value = float(np.einsum("ij,ij->", G, G))
    D = 2.0 * (X @ G)
    radial = np.einsum("ij,ij->i", D, N)
    grad = (D - radial[:, None] * N) / norms[:, None]
    return value, grad


def _canonical_factor(R):
    # same Z = R R^T, but a basis-independent factor: R = U S W^T -> U S
    U, s, _ = np.linalg.svd(R, full_matrices=False)
    F = orient_columns(U * s)
    return row_normalize(F)


def _solve_once(X, k, params, rng):
    n = X.shape[0]
    R0 = rng.standard_normal((n, k))
    R0 = row_normalize(R0)
    shape = R0.shape

    def fg(x):
        val, grad = bm_objective(x.reshape(shape), X)
        return -val, -grad.ravel()

    def measure(x, g):
        norms = np.linalg.norm(x.reshape(shape), axis=1)
        return float(np.linalg.norm(g.reshape(shape) * norms[:, None]))

    def reset(x):
        return row_normalize(x.reshape(shape)).ravel()

    res = minimize_cg(
        fg,
        R0.ravel(),
        grad_tol=params.grad_tol,
        max_iter=params.max_iter,
        measure=measure,
        reset=reset,
    )
    return res


def _solve_sdp(X, params, rng, k):
    X = as_data_matrix(X)
    n = X.shape[0]
    if n < 2:
        raise InvalidArgumentError("the relaxation needs at least two observations")
    params = params or CgParams()
    k = bm_rank(n) if k is None else int(k)
    ss = as_seed_sequence(rng)
    best = None
    total_iter = 0
    for attempt in range(params.restarts):
        gen = np.random.default_rng(child_sequence(ss, attempt))
        try:
            res = _solve_once(X, k, params, gen)
        except DegenerateRowError:
            logger.warning("factor row collapsed during attempt %d", attempt)
            continue
        total_iter += res.iterations
        # a gradient at roundoff level relative to the objective is stationary
        ok = (
            res.converged
            or res.grad_norm <= params.stall_tol * res.grad_norm0
            or res.grad_norm <= 1e-10 * abs(res.f)
        )
        if not res.converged:
            logger.debug(
                "CG stopped after %d iterations at relative gradient %.2e",
                res.iterations,
                res.grad_norm / res.grad_norm0,
            )
        if best is None or (ok, -res.f) > (best[0], -best[1].f):
            best = (ok, res)
    if best is None:
        raise ConvergenceError("every factorization attempt degenerated")
    ok, res = best
    R = res.x.reshape(n, k)
    if not ok:
        raise ConvergenceError(
            f"CG failed to reach relative gradient {params.grad_tol:g} "
            f"after {params.restarts} attempt(s)",
            best=row_normalize(R),
            residual=res.grad_norm / res.grad_norm0,
            iterations=total_iter,
        )
    R_star = _canonical_factor(R)
    alpha_star = float(np.linalg.norm(X.T @ R_star))
    return R_star, alpha_star, total_iter


def solve_sdp_bm(X, params=None, rng=None, k=None):
    """Solve the MD relaxation by the factorization method.

    Returns
    -------
    R_star : ndarray, shape (n, k)
        Factor with unit-norm rows (canonical orientation).
    alpha_star : float
        Square root of the attained objective ``||X^T R_star||_F``.
    """
    R_star, alpha_star, _ = _solve_sdp(X, params, rng, k)
    return R_star, alpha_star


# ---------------------------------------------------------------------------
# rounding
# ---------------------------------------------------------------------------


def _signs(z):
    return np.where(z >= 0.0, 1.0, -1.0)


def round_once(R_star, X, rng):
    """One randomized rounding trial.

    Returns ``(y, v, value)`` with ``y = sign(R g)`` (zero mapped to +1),
    ``v = X^T y / ||X^T y||`` and ``value = ||X v||_1``.
    """
    R_star = np.asarray(R_star, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    g = gen.standard_normal(R_star.shape[1])
    y = _signs(R_star @ g)
    w = X.T @ y
    nrm = np.linalg.norm(w)
    if not nrm > 0.0:
        raise DegenerateTrialError("X^T y vanished for this sign vector")
    v = w / nrm
    return y, v, float(np.abs(X @ v).sum())


def _score_sign(z, rtol=1e-12):
    """Sign that makes the scores sum positive; first clear score breaks ties.

    Scores are unchanged by an orthogonal change of basis, so the rule keeps
    the direction equivariant where a coordinate-based rule would not.
    """
    scale = np.abs(z).max()
    total = z.sum()
    if abs(total) > rtol * z.size * scale:
        return np.sign(total)
    big = np.flatnonzero(np.abs(z) > rtol * scale)
    return np.sign(z[big[0]]) if big.size else 1.0


def mdr_top_component(X, K=DEFAULT_TRIALS, params=None, rng=None):
    """Approximate the direction of maximum mean absolute deviation.

    Each of the ``K`` trials draws from its own child stream of ``rng``, so
    the result depends only on the seed. Ties go to the lowest trial index.
    The sign of ``v_star`` is fixed from the scores ``X v_star``.
    """
    X = as_data_matrix(X)
    if K < 1:
        raise InvalidArgumentError("K must be at least 1")
    ss = as_seed_sequence(rng)
    R_star, alpha, iters = _solve_sdp(X, params, child_sequence(ss, 0), None)
    rounding = child_sequence(ss, 1)
    values = np.full(K, np.nan)
    best = None
    degenerate = 0
    for t in range(K):
        gen = np.random.default_rng(child_sequence(rounding, t))
        try:
            y, v, val = round_once(R_star, X, gen)
        except DegenerateTrialError:
            degenerate += 1
            continue
        values[t] = val
        if best is None or val > best[2]:
            best = (y, v, val)
    if best is None:
        raise ConvergenceError("all rounding trials were degenerate (X^T y = 0)")
    y, v, val = best
    if _score_sign(X @ v) < 0:
        y, v = -y, -v
    ratio = val / alpha if alpha > 0 else 1.0
    if ratio > 1.0 + 1e-8:
        logger.warning("rounded value exceeds the relaxation bound (ratio %.6g)", ratio)
    elif ratio > 1.0:
        ratio = 1.0  # roundoff
    return MdrResult(
        v_star=v,
        alpha_star=alpha,
        ratio=ratio,
        value=val,
        trial_values=values,
        y_star=y,
        seed=(ss.entropy, tuple(ss.spawn_key)),
        degenerate_trials=degenerate,
        cg_iterations=iters,
    )


def mdr_components(X, T, K=DEFAULT_TRIALS, params=None, rng=None):
    """Greedy projection pursuit with the MD scale.

    Component ``j`` is the MDR direction of the data restricted (by
    Householder deflation) to the complement of components ``1..j-1``.
    """
    X = as_data_matrix(X)
    p = X.shape[1]
    if not 1 <= T <= p:
        raise InvalidArgumentError(f"T must lie in [1, {p}], got {T}")
    ss = as_seed_sequence(rng)
    stack = HouseholderStack()
    Xk = X
    cols, ratios, alphas, results = [], [], [], []
    for j in range(T):
        res = mdr_top_component(Xk, K=K, params=params, rng=child_sequence(ss, j))
        cols.append(lift_component(res.v_star, stack))
        ratios.append(res.ratio)
        alphas.append(res.alpha_star)
        results.append(res)
        if j + 1 < T:
            Xk, stack = householder_reduce(Xk, res.v_star, stack)
    V = orient_columns(np.column_stack(cols))
    return ComponentSet(
        V=V,
        method_tag="mdr",
        extras={"ratios": ratios, "alphas": alphas, "results": results},
    )
