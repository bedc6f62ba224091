import numpy as np


def random_orthogonal(p, rng):
    Q, R = np.linalg.qr(rng.standard_normal((p, p)))
    return Q * np.sign(np.diag(R))


def same_up_to_sign(a, b):
    a, b = np.ravel(a), np.ravel(b)
    return min(np.abs(a - b).max(), np.abs(a + b).max())


def cvx_prox_rows(A, nu):
    import cvxpy as cp

    C = cp.Variable(A.shape)
    obj = nu * cp.sum(cp.norm(C, 2, axis=1)) + 0.5 * cp.sum_squares(C - A)
    cp.Problem(cp.Minimize(obj)).solve(solver=cp.CLARABEL)
    return C.value


def cvx_prox_nuclear(A, nu):
    import cvxpy as cp

    P = cp.Variable(A.shape)
    obj = nu * cp.normNuc(P) + 0.5 * cp.sum_squares(P - A)
    cp.Problem(cp.Minimize(obj)).solve(solver=cp.CLARABEL)
    return P.value


def cvx_decomposition(X, weight, penalty="rows"):
    """Optimal value of min ||P||_* + weight * penalty(X - P)."""
    import cvxpy as cp

    P = cp.Variable(X.shape)
    C = X - P
    pen = cp.sum(cp.norm(C, 2, axis=1)) if penalty == "rows" else cp.sum(cp.abs(C))
    prob = cp.Problem(cp.Minimize(cp.normNuc(P) + weight * pen))
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10)
    return prob.value



ACCEPTANCE_LINES = []


def record_criterion(label, ok, detail):
    """Log one acceptance line; ``ok`` is True, False or None (skipped)."""
    status = {True: "PASS", False: "FAIL", None: "SKIP"}[ok]
    line = f"[{status}] {label}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok
