"""Low-leverage decomposition (LLD).

Splits ``X = P + C`` by minimizing ``||P||_* + gamma * sum_i ||c_i||_2`` with
an alternating-direction augmented Lagrangian method. The optimal ``P`` has
hat-matrix diagonal bounded by ``gamma**2``; its leading right singular
vectors are the LLD components.
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .core import (
    ComponentSet,
    as_data_matrix,
    compact_svd,
    nuclear_norm,
    orient_columns,
    row_norms,
    row_sparsity_norm,
    truncated_svd,
)
from .exceptions import (
    ConvergenceError,
    InvalidArgumentError,
    RankDeficientError,
)
from .robust_stats import leverage_scores

logger = logging.getLogger(__name__)

RANK_REPORT_RTOL = 1e-6


def shrink_rows(A, nu):
    """Row-wise soft threshold: ``a_i -> max(1 - nu/||a_i||, 0) a_i``."""
    if nu < 0:
        raise InvalidArgumentError("nu must be nonnegative")
    A = np.asarray(A, dtype=np.float64)
    norms = row_norms(A)
    scale = np.zeros_like(norms)
    pos = norms > 0
    scale[pos] = np.maximum(1.0 - nu / norms[pos], 0.0)
    return A * scale[:, None]


def _svt(svd, nu, shape):
    s = np.maximum(svd.sigma - nu, 0.0)
    keep = s > 0
    if not keep.any():
        return np.zeros(shape), 0
    return (svd.U[:, keep] * s[keep]) @ svd.V[:, keep].T, int(keep.sum())


def shrink_spectral(A, nu):
    """Singular value soft threshold ``U max(S - nu, 0) V^T``."""
    if nu < 0:
        raise InvalidArgumentError("nu must be nonnegative")
    A = np.asarray(A, dtype=np.float64)
    return _svt(compact_svd(A), nu, A.shape)[0]


class _PartialSvt:
    """Spectral shrinkage that computes only the singular values it needs.

    The predicted rank is the number of values that survived the previous
    threshold plus a buffer; if every computed value survives, the request
    is widened and recomputed.
    """

    def __init__(self, shape, buffer=5):
        self.shape = shape
        self.kmax = min(shape)
        self.buffer = buffer
        self.rank = 0

    def __call__(self, A, nu):
        k = min(self.rank + self.buffer, self.kmax)
        while True:
            svd = truncated_svd(A, k)
            saturated = svd.rank == k and svd.sigma[-1] > nu
            if not saturated or k == self.kmax:
                break
            k = min(2 * k, self.kmax)
        out, self.rank = _svt(svd, nu, self.shape)
        return out


@dataclass
class LldOptions:
    """Solver controls.

    ``threshold_convention`` selects the block-update thresholds:
    ``"prox"`` uses ``(gamma/mu, 1/mu)``, the exact blockwise minimizers of the
    augmented Lagrangian; ``"literal"`` uses ``(mu*gamma, mu)`` as printed
    alongside the original method. Besides ``||X - P - C||_F < feas_tol
    ||X||_F``, a run stops only once ``mu ||P_k+1 - P_k||_F <= dual_tol
    ||X||_F``; feasibility alone can occur at non-stationary early iterates.
    ``dual_tol=None`` drops the second test.
    """

    feas_tol: float = 1e-7
    max_iter: int = 5000
    svd_mode: str = "full"
    threshold_convention: str = "prox"
    dual_tol: float = 1e-6
    mu: float = None
    record_history: bool = True

    def __post_init__(self):
        if self.svd_mode not in ("full", "truncated"):
            raise InvalidArgumentError(f"svd_mode must be 'full' or 'truncated', got {self.svd_mode!r}")
        if self.threshold_convention not in ("prox", "literal"):
            raise InvalidArgumentError(
                f"threshold_convention must be 'prox' or 'literal', got {self.threshold_convention!r}"
            )
        if not self.feas_tol > 0 or self.max_iter < 1:
            raise InvalidArgumentError("feas_tol must be positive and max_iter >= 1")


@dataclass
class LldResult:
    P: np.ndarray
    C: np.ndarray
    Q: np.ndarray
    gamma: float
    mu: float
    iterations: int
    final_residual: float
    leverage: np.ndarray
    rank: int
    objective: float
    residual_history: list = field(default_factory=list)
    dual_history: list = field(default_factory=list)


def numerical_rank(P, rtol=RANK_REPORT_RTOL):
    s = np.linalg.svd(np.asarray(P, dtype=np.float64), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rtol * s[0]))


def lld_objective(P, C, gamma):
    return nuclear_norm(P) + gamma * row_sparsity_norm(C)


def default_mu(X):
    """Fixed penalty ``n p / sum_i ||x_i||_2``."""
    n, p = X.shape
    return n * p / row_sparsity_norm(X)


def almm(X, penalty_weight, shrink_penalty, opts, name):
    """Shared ALMM loop for nuclear-norm-plus-penalty decompositions.

    Iterates ``C <- shrink_penalty(X - P + Q/mu, t_C)``,
    ``P <- shrink_spectral(X - C + Q/mu, t_P)``, ``Q <- Q + mu (X - P - C)``
    from ``P = Q = 0`` until ``||X - P - C||_F < feas_tol ||X||_F`` and the
    dual residual test of :class:`LldOptions` passes.

    Returns ``(P, C, Q, mu, iterations, residual, residual_history, dual_history)``.
    """
    n, p = X.shape
    xnorm = float(np.linalg.norm(X))
    mu = opts.mu if opts.mu is not None else default_mu(X)
    if opts.threshold_convention == "prox":
        t_c, t_p = penalty_weight / mu, 1.0 / mu
    else:
        t_c, t_p = mu * penalty_weight, mu
    svt = _PartialSvt(X.shape) if opts.svd_mode == "truncated" else None

    P = np.zeros_like(X)
    Q = np.zeros_like(X)
    C = np.zeros_like(X)
    res_hist, dual_hist = [], []
    residual = np.inf
    for it in range(1, opts.max_iter + 1):
        C = shrink_penalty(X - P + Q / mu, t_c)
        B = X - C + Q / mu
        P_new = svt(B, t_p) if svt is not None else shrink_spectral(B, t_p)
        dual = mu * float(np.linalg.norm(P_new - P))
        P = P_new
        R = X - P - C
        Q = Q + mu * R
        residual = float(np.linalg.norm(R))
        if opts.record_history:
            res_hist.append(residual)
            dual_hist.append(dual)
        if residual < opts.feas_tol * xnorm and (
            opts.dual_tol is None or dual <= opts.dual_tol * xnorm
        ):
            return P, C, Q, mu, it, residual, res_hist, dual_hist
    raise ConvergenceError(
        f"{name}: residual {residual / xnorm:.3e} (relative) after {opts.max_iter} iterations",
        best=(P, C, Q),
        residual=residual / xnorm,
        iterations=opts.max_iter,
    )


def lld_solve(X, gamma, opts=None, **kwargs):
    """Low-leverage decomposition of ``X`` with row penalty ``gamma``.

    Keyword arguments override fields of :class:`LldOptions`.
    """
    X = as_data_matrix(X)
    if not gamma > 0:
        raise InvalidArgumentError("gamma must be positive")
    if not np.any(X):
        raise InvalidArgumentError("X must be nonzero")
    opts = opts or LldOptions()
    if kwargs:
        opts = replace(opts, **kwargs)
    P, C, Q, mu, it, residual, rh, dh = almm(X, gamma, shrink_rows, opts, "lld_solve")
    logger.debug("lld_solve converged in %d iterations", it)
    return LldResult(
        P=P,
        C=C,
        Q=Q,
        gamma=float(gamma),
        mu=mu,
        iterations=it,
        final_residual=residual,
        leverage=leverage_scores(P),
        rank=numerical_rank(P),
        objective=lld_objective(P, C, gamma),
        residual_history=rh,
        dual_history=dh,
    )


def top_right_singular_vectors(P, T, rtol=RANK_REPORT_RTOL):
    """Leading ``T`` right singular vectors, refusing numerically null ones."""
    svd = compact_svd(P)
    if svd.rank:
        achieved = int(np.count_nonzero(svd.sigma > rtol * svd.sigma[0]))
    else:
        achieved = 0
    if achieved < T:
        raise RankDeficientError(T, achieved)
    return orient_columns(svd.V[:, :T])


def lld_components(X, T, gamma, opts=None, **kwargs):
    """Top ``T`` right singular vectors of the low-leverage part."""
    res = lld_solve(X, gamma, opts, **kwargs)
    V = top_right_singular_vectors(res.P, T)
    return ComponentSet(V=V, method_tag="lld", extras={"result": res})


def gamma_heuristic(n, p=None, T=1, mode="rank-control"):
    """Rule-of-thumb choice of ``gamma``.

    ``rank-control`` targets a rank-``T`` solution via ``n gamma^2 = T^2``;
    ``model-fit`` returns ``0.8 sqrt(p/n)``. Either is clamped to
    ``[sqrt(T/n), 1]``.
    """
    if n < 1 or T < 1:
        raise InvalidArgumentError("n and T must be positive")
    if mode == "rank-control":
        g = np.sqrt(T * T / n)
    elif mode == "model-fit":
        if p is None or p < 1:
            raise InvalidArgumentError("model-fit needs p >= 1")
        g = 0.8 * np.sqrt(p / n)
    else:
        raise InvalidArgumentError(f"unknown gamma heuristic mode {mode!r}")
    return float(min(max(g, np.sqrt(T / n)), 1.0))


@dataclass
class CertificateReport:
    max_leverage: float
    spectral_ok: bool
    row_ok: bool
    gaps: dict


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def _candidate_multiplier(U, V, C, gamma, supp):
    # Q = U V^T + (I - U U^T) M (I - V V^T) with rows on supp pinned to
    # gamma N(c_i); M is the minimum-norm solution of the pinned rows
    n, p = C.shape
    Q0 = U @ V.T
    if not supp.any():
        return Q0, 0.0
    G = gamma * C[supp] / row_norms(C[supp])[:, None]
    Pu = np.eye(n) - U @ U.T
    Pv = np.eye(p) - V @ V.T
    if n * p > 40000:
        Q = Q0.copy()
        Q[supp] = G
        return Q, float(np.linalg.norm(Q[supp] - G))
    # row-major vec: vec(A M B) = kron(A, B^T) vec(M)
    A = np.kron(Pu[supp], Pv.T)
    rhs = (G - Q0[supp]).ravel()
    m, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    Q = Q0 + Pu @ m.reshape(n, p) @ Pv
    return Q, float(np.linalg.norm(Q[supp] - G))


def check_optimality_certificate(X, P, C, gamma, Q=None, tol=1e-3, support_tol=1e-8):
    """Measure how well a pair satisfies the first-order optimality conditions.

    A feasible ``(P, C)`` is optimal iff some ``Q`` lies in both the nuclear
    norm subdifferential at ``P`` and ``gamma`` times the row-sparsity norm
    subdifferential at ``C``, that is ``<Q, P> = ||P||_*``, ``||Q||_2 <= 1``,
    ``<Q, C> = gamma sum ||c_i||`` and ``max_i ||q_i|| <= gamma``.

    Without an explicit ``Q`` the candidate is ``U V^T + W`` with ``W``
    orthogonal to both singular subspaces of ``P`` and chosen (minimum
    Frobenius norm) so that row ``i`` equals ``gamma c_i/||c_i||`` on the
    support of ``C``. Gaps are relative; ``pin_residual`` reports how well
    the pinned rows could be matched. The report is a diagnostic since the
    multiplier is not unique.
    """
    X = as_data_matrix(X)
    P = np.asarray(P, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64)
    xnorm = float(np.linalg.norm(X))
    if np.linalg.norm(X - P - C) > 1e-6 * xnorm:
        raise InvalidArgumentError("(P, C) is not feasible: X != P + C")

    svd = compact_svd(P)
    if svd.rank:
        keep = svd.sigma > RANK_REPORT_RTOL * svd.sigma[0]
        U, V = svd.U[:, keep], svd.V[:, keep]
    else:
        U, V = svd.U, svd.V
    pin = 0.0
    if Q is None:
        cn = row_norms(C)
        supp = cn > support_tol * max(xnorm, 1e-300)
        Q, pin = _candidate_multiplier(U, V, C, gamma, supp)
    Q = np.asarray(Q, dtype=np.float64)

    nuc = nuclear_norm(P)
    rs = row_sparsity_norm(C)
    qspec = float(np.linalg.norm(Q, 2)) if Q.size else 0.0
    qrow = float(row_norms(Q).max()) if Q.size else 0.0
    gaps = {
        "spectral_inner": abs(float(np.sum(Q * P)) - nuc) / max(nuc, xnorm, 1e-300),
        "spectral_norm": max(qspec - 1.0, 0.0),
        "row_inner": abs(float(np.sum(Q * C)) - gamma * rs) / max(gamma * rs, gamma * xnorm, 1e-300),
        "row_norm": max(qrow - gamma, 0.0) / gamma,
        "pin_residual": pin / max(gamma * np.sqrt(X.shape[0]), 1e-300),
    }
    return CertificateReport(
        max_leverage=float(leverage_scores(P).max()) if P.size else 0.0,
        spectral_ok=gaps["spectral_inner"] <= tol and gaps["spectral_norm"] <= tol,
        row_ok=gaps["row_inner"] <= tol and gaps["row_norm"] <= tol and gaps["pin_residual"] <= tol,
        gaps=gaps,
    )
