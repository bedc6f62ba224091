"""Scales, robust centering and order statistics."""

from dataclasses import dataclass, field

import numpy as np

from .core import as_data_matrix, compact_svd
from .exceptions import ConvergenceError, InvalidArgumentError, InvalidInputError

#: Percentile convention used throughout (linear interpolation between order
#: statistics at position h = (n-1)q + 1).
QUANTILE_METHOD = "linear"


def _vector(y, name="y"):
    y = np.asarray(y, dtype=np.float64).ravel()
    if not np.all(np.isfinite(y)):
        raise InvalidInputError(f"{name} contains NaN or Inf")
    return y


def std_scale(y):
    """Uncentered standard deviation ``||y||_2`` (no 1/n normalization)."""
    return float(np.linalg.norm(_vector(y)))


def md_scale(y):
    """Mean absolute deviation scale ``||y||_1``."""
    return float(np.abs(_vector(y)).sum())


def madn(x):
    """Median absolute deviation from the median, without the 0.6745 factor."""
    x = _vector(x, "x")
    if x.size == 0:
        raise InvalidArgumentError("madn needs at least one value")
    return float(np.median(np.abs(x - np.median(x))))


@dataclass
class CenteringReport:
    mu_hat: np.ndarray
    iterations: int
    residual: float
    objective_history: list = field(default_factory=list)
    perturbations: int = 0


def _median_objective(X, mu):
    return float(np.linalg.norm(X - mu, axis=1).sum())


def euclidean_median(X, tol=1e-10, max_iter=10000, rng=None):
    """Spatial (Euclidean) median via Weiszfeld iterations.

    Starts from the coordinatewise mean. When an iterate falls within 1e-12
    of a data point, the point is returned if it satisfies the subgradient
    optimality condition; otherwise the iterate is nudged by
    ``1e-9 * ||X||_F`` in a random direction drawn from ``rng``.

    Returns
    -------
    mu_hat : ndarray, shape (p,)
    report : CenteringReport
        ``residual`` is the final step length relative to ``max(1, |mu|)``.
    """
    X = as_data_matrix(X)
    if tol <= 0:
        raise InvalidArgumentError("tol must be positive")
    rng = np.random.default_rng(rng)
    n, p = X.shape
    if n == 1:
        return X[0].copy(), CenteringReport(X[0].copy(), 0, 0.0, [0.0])

    xscale = max(float(np.linalg.norm(X)), 1e-300)
    mu = X.mean(axis=0)
    history = [_median_objective(X, mu)]
    bumps = 0
    step = np.inf
    for it in range(1, max_iter + 1):
        d = np.linalg.norm(X - mu, axis=1)
        near = d <= 1e-12 * xscale
        if near.any():
            others = ~near
            if not others.any():
                # every observation coincides with mu
                return mu, CenteringReport(mu, it, 0.0, history, bumps)
            pull = ((X[others] - mu) / d[others, None]).sum(axis=0)
            if np.linalg.norm(pull) <= near.sum():
                mu = X[np.flatnonzero(near)[0]].copy()
                history.append(_median_objective(X, mu))
                return mu, CenteringReport(mu, it, 0.0, history, bumps)
            direction = rng.standard_normal(p)
            mu = mu + 1e-9 * xscale * direction / np.linalg.norm(direction)
            bumps += 1
            continue
        w = 1.0 / d
        new = (w @ X) / w.sum()
        step = np.linalg.norm(new - mu) / max(1.0, np.linalg.norm(new))
        mu = new
        history.append(_median_objective(X, mu))
        if step <= tol:
            return mu, CenteringReport(mu, it, float(step), history, bumps)
    raise ConvergenceError(
        f"Weiszfeld iteration did not reach tol={tol} in {max_iter} steps",
        best=mu,
        residual=float(step),
        iterations=max_iter,
    )


def center_rows(X, mu):
    """Subtract ``mu`` from every row of ``X``."""
    X = as_data_matrix(X)
    mu = np.asarray(mu, dtype=np.float64).ravel()
    if mu.shape[0] != X.shape[1]:
        raise InvalidArgumentError(
            f"center has length {mu.shape[0]} but X has {X.shape[1]} columns"
        )
    return X - mu


def leverage_scores(P):
    """Diagonal of the hat matrix ``P (P^T P)^+ P^T``.

    Computed as squared row norms of the left singular vectors of the compact
    SVD, so the scores sum to the numerical rank of ``P``.
    """
    P = np.asarray(P, dtype=np.float64)
    svd = compact_svd(P)
    if svd.rank == 0:
        return np.zeros(P.shape[0])
    return np.einsum("ij,ij->i", svd.U, svd.U)


@dataclass(frozen=True)
class BoxStats:
    min: float
    q25: float
    median: float
    q75: float
    max: float
    iqr: float
    outlier_fraction: float
    n: int
    whisker_low: float
    whisker_high: float

    def as_dict(self):
        return {
            "min": self.min,
            "q25": self.q25,
            "median": self.median,
            "q75": self.q75,
            "max": self.max,
            "iqr": self.iqr,
            "outlier_fraction": self.outlier_fraction,
            "n": self.n,
        }


def box_stats(y, whisker=1.5, method=QUANTILE_METHOD):
    """Box-and-whisker summary of one-dimensional data.

    Points beyond ``whisker * IQR`` from the quartiles count as outliers;
    whiskers end at the most extreme data point inside that fence.
    """
    y = _vector(y)
    n = y.size
    if n < 4:
        raise InvalidArgumentError(f"box_stats needs at least 4 values, got {n}")
    q25, med, q75 = np.percentile(y, [25, 50, 75], method=method)
    iqr = float(q75 - q25)
    lo, hi = q25 - whisker * iqr, q75 + whisker * iqr
    inside = (y >= lo) & (y <= hi)
    out = n - int(inside.sum())
    return BoxStats(
        min=float(y.min()),
        q25=float(q25),
        median=float(med),
        q75=float(q75),
        max=float(y.max()),
        iqr=iqr,
        outlier_fraction=out / n,
        n=n,
        whisker_low=float(y[inside].min()),
        whisker_high=float(y[inside].max()),
    )


def surface_distances(X, V, tol=1e-8):
    """Distance from each row of ``X`` to the subspace spanned by ``V``'s columns."""
    X = as_data_matrix(X)
    V = np.asarray(V, dtype=np.float64)
    if V.ndim == 1:
        V = V[:, None]
    if V.shape[0] != X.shape[1]:
        raise InvalidArgumentError("V must have as many rows as X has columns")
    if np.abs(V.T @ V - np.eye(V.shape[1])).max() > tol:
        raise InvalidArgumentError("V must have orthonormal columns")
    R = X - (X @ V) @ V.T
    return np.linalg.norm(R, axis=1)
