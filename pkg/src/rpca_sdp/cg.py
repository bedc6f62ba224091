"""Nonlinear conjugate gradient with the Hager-Zhang direction update.

Line searches use scipy's strong-Wolfe implementation. The solver works on
flat vectors; callers supply ``fg(x) -> (f, g)`` and a ``measure(x, g)``
returning the gradient size used in the stopping test, which lets the
factorization solver measure gradients at row-normalized points.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import line_search
from scipy.optimize._linesearch import LineSearchWarning


@dataclass
class CgResult:
    x: np.ndarray
    f: float
    grad_norm: float
    grad_norm0: float
    iterations: int
    converged: bool
    restarts: int


def _wolfe(fun, jac, x, d, g, f, c1, c2):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LineSearchWarning)
        warnings.simplefilter("ignore", RuntimeWarning)
        out = line_search(fun, jac, x, d, gfk=g, old_fval=f, c1=c1, c2=c2, maxiter=50)
    return out[0]


def minimize_cg(
    fg,
    x0,
    grad_tol=1e-8,
    max_iter=5000,
    measure=None,
    reset=None,
    restart_every=None,
    c1=1e-4,
    c2=0.1,
    eta=0.01,
):
    """Minimize a smooth function by nonlinear CG.

    Parameters
    ----------
    fg : callable
        Returns ``(f, g)`` at a point.
    grad_tol : float
        Stop once ``measure(x, g) <= grad_tol * measure(x0, g0)``.
    reset : callable, optional
        Maps an iterate to an equivalent one (same objective) before a
        steepest-descent restart; used to renormalize factor rows.
    restart_every : int, optional
        Periodic restart interval (defaults to the problem dimension).
    eta : float
        Hager-Zhang lower-bound parameter for the CG coefficient.
    """
    measure = measure or (lambda x, g: float(np.linalg.norm(g)))
    cache = {}

    def evaluate(x):
        key = x.tobytes()
        if key not in cache:
            cache.clear()
            cache[key] = fg(x)
        return cache[key]

    fun = lambda z: evaluate(z)[0]
    jac = lambda z: evaluate(z)[1]

    x = np.array(x0, dtype=np.float64, copy=True)
    f, g = evaluate(x)
    gn0 = measure(x, g)
    gn = gn0
    if gn0 == 0.0:
        return CgResult(x, f, 0.0, 0.0, 0, True, 0)
    restart_every = restart_every or max(x.size, 50)
    d = -g
    restarts = 0
    since_restart = 0
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        alpha = _wolfe(fun, jac, x, d, g, f, c1, c2)
        if alpha is None:
            # fall back to steepest descent from an equivalent point
            if reset is not None:
                x = reset(x)
                f, g = evaluate(x)
            d = -g
            restarts += 1
            since_restart = 0
            alpha = _wolfe(fun, jac, x, d, g, f, c1, c2)
            if alpha is None:
                break
        x_new = x + alpha * d
        f_new, g_new = evaluate(x_new)
        gn = measure(x_new, g_new)
        if gn <= grad_tol * gn0:
            x, f, g = x_new, f_new, g_new
            converged = True
            break
        since_restart += 1
        if since_restart >= restart_every:
            x, f, g = x_new, f_new, g_new
            if reset is not None:
                x = reset(x)
                f, g = evaluate(x)
            d = -g
            restarts += 1
            since_restart = 0
            continue
        y = g_new - g
        dy = float(d @ y)
        if dy <= 0.0:
            beta = 0.0
        else:
            beta = float((y - 2.0 * d * (y @ y) / dy) @ g_new) / dy
            eta_k = -1.0 / (np.linalg.norm(d) * min(eta, np.linalg.norm(g)))
            beta = max(beta, eta_k)
        d = -g_new + beta * d
        x, f, g = x_new, f_new, g_new
        if float(d @ g) >= 0.0:
            d = -g
    return CgResult(x, float(f), float(gn), float(gn0), it, converged, restarts)
