"""Dense two-phase simplex with Bland's rule.

Sized for desk-scale problems (tens of variables/constraints).  Bland's
rule makes the returned vertex deterministic and rules out cycling; the
solver reports primal and dual solutions at optimum, a Farkas certificate
when infeasible, and an improving ray when unbounded.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SolverError

TOL = 1e-9


@dataclass
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None = None
    fun: float | None = None
    dual_eq: np.ndarray | None = None
    dual_ub: np.ndarray | None = None
    certificate: np.ndarray | None = None  # Farkas vector or unbounded ray
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def _simplex_standard(c, A, b, max_iter=20000):
    """min c.x s.t. Ax = b, x >= 0.  Returns (status, x, y, cert, iters)."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    m, n = A.shape
    neg = b < 0
    A = A.copy()
    A[neg] *= -1
    b = b.copy()
    b[neg] *= -1

    # phase 1 tableau: [A | I | b], cost = sum of artificials
    T = np.hstack([A, np.eye(m), b[:, None]])
    basis = list(range(n, n + m))
    iters = 0

    def pivot(T, basis, col_costs, allowed):
        nonlocal iters
        while True:
            y = np.zeros(m)
            cb = np.array([col_costs[j] for j in basis])
            # reduced costs r_j = c_j - cb . T[:, j]
            r = np.array(
                [col_costs[j] - cb @ T[:, j] if allowed[j] else np.inf for j in range(T.shape[1] - 1)]
            )
            enter = -1
            for j in range(T.shape[1] - 1):
                if allowed[j] and r[j] < -TOL:
                    enter = j  # Bland: smallest index
                    break
            if enter < 0:
                return "optimal"
            col = T[:, enter]
            pos = col > TOL
            if not pos.any():
                return ("unbounded", enter)
            ratios = np.full(m, np.inf)
            ratios[pos] = T[pos, -1] / col[pos]
            rmin = ratios.min()
            # Bland: among ties, leave the row whose basic var has smallest index
            rows = np.flatnonzero(ratios <= rmin + TOL)
            leave = min(rows, key=lambda i: basis[i])
            piv = T[leave, enter]
            T[leave] /= piv
            for i in range(m):
                if i != leave and abs(T[i, enter]) > 0:
                    T[i] -= T[i, enter] * T[leave]
            basis[leave] = enter
            iters += 1
            if iters > max_iter:
                raise SolverError("simplex iteration cap exceeded")

    costs1 = np.concatenate([np.zeros(n), np.ones(m)])
    allowed = np.ones(n + m, dtype=bool)
    status = pivot(T, basis, costs1, allowed)
    if status != "optimal":
        raise SolverError("phase 1 cannot be unbounded")
    phase1 = float(costs1[basis] @ T[:, -1])
    if phase1 > 1e-7:
        # Farkas: y.b > 0, y.A <= 0 (in the sign-flipped system); undo flips
        cb = costs1[basis]
        y = np.array([cb @ T[:, n + i] for i in range(m)])
        y[neg] *= -1
        return "infeasible", None, None, y, iters

    # drive artificials out of the basis where possible
    for i in range(m):
        if basis[i] >= n:
            row = T[i, :n]
            j = next((k for k in range(n) if abs(row[k]) > TOL), None)
            if j is not None:
                piv = T[i, j]
                T[i] /= piv
                for k in range(m):
                    if k != i and abs(T[k, j]) > 0:
                        T[k] -= T[k, j] * T[i]
                basis[i] = j
                iters += 1

    costs2 = np.concatenate([c, np.zeros(m)])
    allowed = np.concatenate([np.ones(n, dtype=bool), np.zeros(m, dtype=bool)])
    status = pivot(T, basis, costs2, allowed)
    x = np.zeros(n)
    for i, j in enumerate(basis):
        if j < n:
            x[j] = T[i, -1]
    if status != "optimal":
        _, enter = status
        ray = np.zeros(n)
        ray[enter] = 1.0
        for i, j in enumerate(basis):
            if j < n:
                ray[j] = -T[i, enter]
        return "unbounded", x, None, ray, iters
    cb = costs2[basis]
    y = np.array([cb @ T[:, n + i] for i in range(m)])
    y[neg] *= -1
    return "optimal", x, y, None, iters


def lp_solve(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=None) -> LPResult:
    """min c.x s.t. A_ub x <= b_ub, A_eq x = b_eq, bounds per variable.

    ``bounds`` is a list of (lo, hi) with None for unbounded; default is
    free variables.  Duals follow the convention: at optimum,
    fun = dual_eq . b_eq + dual_ub . b_ub + bound terms, dual_ub <= 0.
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.atleast_1d(np.asarray(b_ub, dtype=float))
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.atleast_1d(np.asarray(b_eq, dtype=float))
    if bounds is None:
        bounds = [(None, None)] * n
    lo = np.array([-np.inf if b[0] is None else float(b[0]) for b in bounds])
    hi = np.array([np.inf if b[1] is None else float(b[1]) for b in bounds])

    # standard-form variable map: each original var is lo + u, hi - u, or p - q
    cols = []  # (var, sign, offset_flag) columns in terms of original vars
    shift = np.zeros(n)
    col_var, col_sign = [], []
    for j in range(n):
        if np.isfinite(lo[j]):
            shift[j] = lo[j]
            col_var.append(j)
            col_sign.append(1.0)
        elif np.isfinite(hi[j]):
            shift[j] = hi[j]
            col_var.append(j)
            col_sign.append(-1.0)
        else:
            col_var.extend([j, j])
            col_sign.extend([1.0, -1.0])
    col_var = np.array(col_var)
    col_sign = np.array(col_sign)
    ns = col_var.size

    def expand(M):
        return M[:, col_var] * col_sign[None, :]

    # upper-bound rows for doubly bounded vars
    ub_rows, ub_rhs = [], []
    for j in range(n):
        if np.isfinite(lo[j]) and np.isfinite(hi[j]):
            r = np.zeros(n)
            r[j] = 1.0
            ub_rows.append(r)
            ub_rhs.append(hi[j])
    A_ub_all = np.vstack([A_ub] + ([np.vstack(ub_rows)] if ub_rows else []))
    b_ub_all = np.concatenate([b_ub, np.array(ub_rhs)])

    m_ub = A_ub_all.shape[0]
    As_eq = expand(A_eq)
    As_ub = expand(A_ub_all)
    rhs_eq = b_eq - A_eq @ shift
    rhs_ub = b_ub_all - A_ub_all @ shift
    # slacks for inequality rows
    A_std = np.vstack(
        [
            np.hstack([As_eq, np.zeros((As_eq.shape[0], m_ub))]),
            np.hstack([As_ub, np.eye(m_ub)]),
        ]
    )
    b_std = np.concatenate([rhs_eq, rhs_ub])
    c_std = np.concatenate([c[col_var] * col_sign, np.zeros(m_ub)])

    status, xs, y, cert, iters = _simplex_standard(c_std, A_std, b_std)
    m_eq = A_eq.shape[0]
    if status == "infeasible":
        return LPResult(status="infeasible", certificate=cert, iterations=iters)
    x = shift.copy()
    np.add.at(x, col_var, col_sign * xs[:ns])
    if status == "unbounded":
        ray = np.zeros(n)
        np.add.at(ray, col_var, col_sign * cert[:ns])
        return LPResult(status="unbounded", x=x, certificate=ray, iterations=iters)
    fun = float(c @ x)
    dual_eq = y[:m_eq]
    dual_ub = y[m_eq : m_eq + A_ub.shape[0]]
    return LPResult(
        status="optimal",
        x=x,
        fun=fun,
        dual_eq=dual_eq,
        dual_ub=dual_ub,
        certificate=None,
        iterations=iters,
    )


def complementary_slackness_residual(res: LPResult, c, A_ub=None, b_ub=None, A_eq=None, b_eq=None):
    """max of duality-gap style residuals at an optimal LPResult."""
    if not res.optimal:
        raise SolverError("residual only defined at optimum")
    gap = 0.0
    dual_obj = 0.0
    if A_eq is not None and res.dual_eq is not None and len(np.atleast_1d(b_eq)) > 0:
        dual_obj += float(np.dot(res.dual_eq, np.atleast_1d(b_eq)))
    if A_ub is not None and res.dual_ub is not None and len(np.atleast_1d(b_ub)) > 0:
        dual_obj += float(np.dot(res.dual_ub, np.atleast_1d(b_ub)))
        slack = np.atleast_1d(b_ub) - np.atleast_2d(A_ub) @ res.x
        gap = max(gap, float(np.max(np.abs(res.dual_ub * slack))))
    return gap
