"""Dense two-phase revised simplex.

Solves ``max c.x`` subject to equality rows, ``>=`` rows and per-variable
bounds (infinite bounds allowed). Every solver in the package goes through
:func:`solve`; the LPs here are small and dense (a handful of rows, up to a
few hundred thousand posterior columns), so a dense basis inverse with
product-form updates and periodic reinversion is adequate.

Dual convention (maximisation): with row multipliers ``y`` the reduced costs
are ``r = c - A_eq.T y_eq - A_ge.T y_ge``. At an optimum ``y_ge <= 0``,
``r_j <= 0`` for variables at their lower bound and ``r_j >= 0`` at their
upper bound.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

FEAS_TOL = 1e-9
COST_TOL = 1e-10
PIVOT_TOL = 1e-9
DEGENERATE_STREAK = 50
REFACTOR_EVERY = 40


class LPStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"
    NUMERICAL = "numerical"


def _as_matrix(rows, ncols):
    if rows is None:
        return np.zeros((0, ncols))
    a = np.asarray(rows, dtype=float)
    if a.size == 0:
        return np.zeros((0, ncols))
    return np.atleast_2d(a)


@dataclass(frozen=True)
class LinearProgram:
    """``max objective.x`` s.t. ``a_eq x = b_eq``, ``a_ge x >= b_ge``, bounds.

    Bounds default to ``x >= 0``. Use :meth:`from_rows` to build from lists of
    ``(row, rhs)`` pairs.
    """

    objective: np.ndarray
    a_eq: np.ndarray = None
    b_eq: np.ndarray = None
    a_ge: np.ndarray = None
    b_ge: np.ndarray = None
    lower: np.ndarray = None
    upper: np.ndarray = None

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float).ravel()
        n = c.size
        a_eq = _as_matrix(self.a_eq, n)
        a_ge = _as_matrix(self.a_ge, n)
        b_eq = np.asarray(self.b_eq if self.b_eq is not None else [], dtype=float).ravel()
        b_ge = np.asarray(self.b_ge if self.b_ge is not None else [], dtype=float).ravel()
        lower = np.zeros(n) if self.lower is None else np.asarray(self.lower, dtype=float).ravel()
        upper = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float).ravel()
        if a_eq.shape != (b_eq.size, n) or a_ge.shape != (b_ge.size, n):
            raise ValueError("constraint rows must match the objective length and rhs count")
        if lower.size != n or upper.size != n:
            raise ValueError("bounds must have one entry per variable")
        if not (np.all(np.isfinite(b_eq)) and np.all(np.isfinite(b_ge))):
            raise ValueError("right-hand sides must be finite")
        if np.any(lower > upper):
            raise ValueError("lower bound above upper bound")
        for name, value in (("objective", c), ("a_eq", a_eq), ("b_eq", b_eq), ("a_ge", a_ge),
                            ("b_ge", b_ge), ("lower", lower), ("upper", upper)):
            object.__setattr__(self, name, value)

    @classmethod
    def from_rows(cls, objective, eq=(), ge=(), bounds=None):
        n = len(objective)
        eq = list(eq)
        ge = list(ge)
        a_eq = np.array([r for r, _ in eq], dtype=float).reshape(len(eq), n)
        a_ge = np.array([r for r, _ in ge], dtype=float).reshape(len(ge), n)
        lower = upper = None
        if bounds is not None:
            lo, hi = zip(*bounds) if len(bounds) else ((), ())
            lower = np.array([-np.inf if v is None else v for v in lo], dtype=float)
            upper = np.array([np.inf if v is None else v for v in hi], dtype=float)
        return cls(objective, a_eq, [b for _, b in eq], a_ge, [b for _, b in ge], lower, upper)

    @property
    def num_vars(self):
        return self.objective.size

    def permuted(self, perm):
        """The same LP with columns reordered by ``perm``."""
        perm = np.asarray(perm)
        return LinearProgram(self.objective[perm], self.a_eq[:, perm], self.b_eq,
                             self.a_ge[:, perm], self.b_ge, self.lower[perm], self.upper[perm])


@dataclass
class LPSolution:
    status: LPStatus
    x: np.ndarray | None
    value: float | None
    duals: np.ndarray | None  # eq rows first, then ge rows
    diagnostics: dict = field(default_factory=dict)

    @property
    def optimal(self):
        return self.status is LPStatus.OPTIMAL


class _Standard:
    """``max c.z`` s.t. ``A z = b``, ``z >= 0``, ``b >= 0`` plus the map back."""

    def __init__(self, lp: LinearProgram):
        n = lp.num_vars
        orig, sign, offset = [], [], np.zeros(n)
        ub_cols, ub_rhs = [], []
        for j in range(n):
            lo, hi = lp.lower[j], lp.upper[j]
            if np.isfinite(lo):
                offset[j] = lo
                orig.append(j)
                sign.append(1.0)
                if np.isfinite(hi):
                    ub_cols.append(len(orig) - 1)
                    ub_rhs.append(hi - lo)
            elif np.isfinite(hi):
                offset[j] = hi
                orig.append(j)
                sign.append(-1.0)
            else:
                orig.extend([j, j])
                sign.extend([1.0, -1.0])
        self.orig = np.array(orig, dtype=int)
        self.sign = np.array(sign)
        self.offset = offset
        nz = self.orig.size
        n_eq, n_ge, n_ub = lp.b_eq.size, lp.b_ge.size, len(ub_cols)
        self.n_eq, self.n_ge, self.n_ub = n_eq, n_ge, n_ub
        rows = n_eq + n_ge + n_ub
        self.n_struct = nz
        ncols = nz + n_ge + n_ub
        A = np.zeros((rows, ncols))
        b = np.zeros(rows)
        A[:n_eq, :nz] = lp.a_eq[:, self.orig] * self.sign
        b[:n_eq] = lp.b_eq - lp.a_eq @ offset
        A[n_eq:n_eq + n_ge, :nz] = lp.a_ge[:, self.orig] * self.sign
        A[n_eq:n_eq + n_ge, nz:nz + n_ge] = -np.eye(n_ge)
        b[n_eq:n_eq + n_ge] = lp.b_ge - lp.a_ge @ offset
        for k, (col, rhs) in enumerate(zip(ub_cols, ub_rhs)):
            A[n_eq + n_ge + k, col] = 1.0
            A[n_eq + n_ge + k, nz + n_ge + k] = 1.0
            b[n_eq + n_ge + k] = rhs
        # Flip rows so b >= 0; ge rows with b == 0 are flipped too so their
        # slack enters the starting basis with coefficient +1.
        flip = np.ones(rows)
        ge_rows = slice(n_eq, n_eq + n_ge)
        flip[b < 0] = -1.0
        ge_zero = np.zeros(rows, dtype=bool)
        ge_zero[ge_rows] = b[ge_rows] == 0
        flip[ge_zero] = -1.0
        A *= flip[:, None]
        b *= flip
        self.flip = flip
        c = np.zeros(ncols)
        c[:nz] = lp.objective[self.orig] * self.sign
        self.A, self.b, self.c = A, b, c

    def slack_basis(self):
        """Per row: a slack column with coefficient +1, or -1 if none exists."""
        rows = self.A.shape[0]
        basis = np.full(rows, -1)
        for i in range(self.n_eq, rows):
            col = self.n_struct + (i - self.n_eq)
            if self.A[i, col] > 0:
                basis[i] = col
        return basis

    def recover(self, z):
        x = self.offset.copy()
        np.add.at(x, self.orig, self.sign * z[:self.n_struct])
        return x


def _simplex(A, b, c, basis, allowed, max_iter, stats):
    """Revised simplex from a feasible basis. Returns (status, basis, Binv)."""
    basis = basis.copy()
    Binv = np.linalg.inv(A[:, basis])
    x_b = Binv @ b
    degenerate_run = 0
    bland = False
    since_refactor = 0
    blocked = ~allowed
    while True:
        if stats["iterations"] >= max_iter:
            return LPStatus.ITERATION_LIMIT, basis, Binv
        if since_refactor >= REFACTOR_EVERY:
            try:
                Binv = np.linalg.inv(A[:, basis])
            except np.linalg.LinAlgError:
                return LPStatus.NUMERICAL, basis, Binv
            x_b = Binv @ b
            since_refactor = 0
        y = c[basis] @ Binv
        red = c - y @ A
        red[basis] = 0.0
        red[blocked] = 0.0
        if bland:
            cand = np.flatnonzero(red > COST_TOL)
            if cand.size == 0:
                return LPStatus.OPTIMAL, basis, Binv
            q = cand[0]
        else:
            q = int(np.argmax(red))
            if red[q] <= COST_TOL:
                return LPStatus.OPTIMAL, basis, Binv
        u = Binv @ A[:, q]
        pos = np.flatnonzero(u > PIVOT_TOL)
        if pos.size == 0:
            stats["unbounded_column"] = int(q)
            return LPStatus.UNBOUNDED, basis, Binv
        ratios = np.maximum(x_b[pos], 0.0) / u[pos]
        theta = ratios.min()
        ties = pos[ratios <= theta + FEAS_TOL * max(1.0, theta)]
        if bland:
            r = ties[np.argmin(basis[ties])]
        else:
            r = ties[np.argmax(u[ties])]
        if theta <= FEAS_TOL:
            degenerate_run += 1
            if degenerate_run > DEGENERATE_STREAK and not bland:
                bland = True
                stats["bland_switches"] += 1
        else:
            degenerate_run = 0
            bland = False
        x_b = x_b - theta * u
        x_b[r] = theta
        basis[r] = q
        pivot_row = Binv[r] / u[r]
        Binv -= np.outer(u, pivot_row)
        Binv[r] = pivot_row
        since_refactor += 1
        stats["iterations"] += 1


def solve(lp: LinearProgram, max_iter: int = 50_000) -> LPSolution:
    """Solve ``lp``; never raises on infeasible/unbounded input (see status)."""
    std = _Standard(lp)
    A, b = std.A, std.b
    rows, ncols = A.shape
    stats = {"iterations": 0, "bland_switches": 0}
    n_orig = lp.num_vars

    if rows == 0:
        # Only bounds: each variable sits at whichever bound the cost favours.
        x = np.where(lp.objective > 0, lp.upper, np.where(lp.objective < 0, lp.lower,
                     np.where(np.isfinite(lp.lower), lp.lower, np.where(np.isfinite(lp.upper), lp.upper, 0.0))))
        if not np.all(np.isfinite(x)):
            return LPSolution(LPStatus.UNBOUNDED, None, None, None, stats)
        return LPSolution(LPStatus.OPTIMAL, x, float(lp.objective @ x), np.zeros(0), stats)

    basis = std.slack_basis()
    need_art = np.flatnonzero(basis < 0)
    n_art = need_art.size
    A1 = np.hstack([A, np.zeros((rows, n_art))])
    for k, i in enumerate(need_art):
        A1[i, ncols + k] = 1.0
        basis[i] = ncols + k
    is_art = np.zeros(ncols + n_art, dtype=bool)
    is_art[ncols:] = True

    if n_art:
        c1 = np.where(is_art, -1.0, 0.0)
        status, basis, Binv = _simplex(A1, b, c1, basis, np.ones(ncols + n_art, dtype=bool), max_iter, stats)
        stats["phase1_iterations"] = stats["iterations"]
        if status is not LPStatus.OPTIMAL:
            return LPSolution(status, None, None, None, stats)
        Binv = np.linalg.inv(A1[:, basis])
        x_b = Binv @ b
        infeas = float(x_b[is_art[basis]].sum())
        if infeas > FEAS_TOL * max(1.0, float(np.abs(b).max())):
            y1 = c1[basis] @ Binv
            farkas = -y1 * std.flip
            stats["farkas"] = {
                "eq": farkas[:std.n_eq].tolist(),
                "ge": farkas[std.n_eq:std.n_eq + std.n_ge].tolist(),
                "upper": farkas[std.n_eq + std.n_ge:].tolist(),
                "phase1_infeasibility": infeas,
            }
            return LPSolution(LPStatus.INFEASIBLE, None, None, None, stats)
        # Drive zero-level artificials out of the basis where possible.
        for r in np.flatnonzero(is_art[basis]):
            row = Binv[r] @ A1[:, :ncols]
            row[basis[basis < ncols]] = 0.0
            j = int(np.argmax(np.abs(row)))
            if abs(row[j]) > PIVOT_TOL:
                u = Binv @ A1[:, j]
                pivot_row = Binv[r] / u[r]
                Binv -= np.outer(u, pivot_row)
                Binv[r] = pivot_row
                basis[r] = j
    c2 = np.concatenate([std.c, np.zeros(n_art)])
    allowed = ~is_art
    status, basis, Binv = _simplex(A1, b, c2, basis, allowed, max_iter, stats)
    if status is not LPStatus.OPTIMAL:
        return LPSolution(status, None, None, None, stats)

    try:
        Binv = np.linalg.inv(A1[:, basis])
    except np.linalg.LinAlgError:
        return LPSolution(LPStatus.NUMERICAL, None, None, None, stats)
    z = np.zeros(ncols + n_art)
    z[basis] = np.maximum(Binv @ b, 0.0)
    x = std.recover(z)
    x = np.clip(x, lp.lower, lp.upper)
    y_std = c2[basis] @ Binv
    y = y_std * std.flip
    duals = y[:std.n_eq + std.n_ge]
    sol = LPSolution(LPStatus.OPTIMAL, x, float(lp.objective @ x), duals, stats)
    sol.diagnostics.update(kkt_residuals(lp, sol))
    assert x.size == n_orig
    return sol


def reduced_costs(lp: LinearProgram, duals):
    y_eq = duals[:lp.b_eq.size]
    y_ge = duals[lp.b_eq.size:]
    return lp.objective - lp.a_eq.T @ y_eq - lp.a_ge.T @ y_ge


def dual_objective(lp: LinearProgram, duals):
    """Lagrangian dual bound; ``>= primal value`` for any sign-feasible duals."""
    r = reduced_costs(lp, duals)
    bound = lp.b_eq @ duals[:lp.b_eq.size] + lp.b_ge @ duals[lp.b_eq.size:]
    with np.errstate(invalid="ignore"):
        h = np.where(r > 0, r * lp.upper, np.where(r < 0, r * lp.lower, 0.0))
    return float(bound + h.sum())


def kkt_residuals(lp: LinearProgram, sol: LPSolution):
    """Max-norm primal, dual and complementary-slackness residuals."""
    x, y = sol.x, sol.duals
    slack_eq = lp.a_eq @ x - lp.b_eq
    slack_ge = lp.a_ge @ x - lp.b_ge
    primal = max(
        float(np.abs(slack_eq).max(initial=0.0)),
        float((-slack_ge).max(initial=0.0)),
        float((lp.lower - x).max(initial=0.0)),
        float((x - lp.upper).max(initial=0.0)),
    )
    y_ge = y[lp.b_eq.size:]
    r = reduced_costs(lp, y)
    dual = max(
        float(y_ge.max(initial=0.0)),
        float(np.where(np.isinf(lp.upper), r, 0.0).max(initial=0.0)),
        float(np.where(np.isinf(lp.lower), -r, 0.0).max(initial=0.0)),
    )
    # Infinite bounds are covered by the dual residual above.
    gap_lo = np.where(np.isfinite(lp.lower), x - lp.lower, 0.0)
    gap_hi = np.where(np.isfinite(lp.upper), lp.upper - x, 0.0)
    cs_bounds = np.where(r < 0, -r * gap_lo, np.where(r > 0, r * gap_hi, 0.0))
    comp = max(float(np.abs(y_ge * slack_ge).max(initial=0.0)), float(np.abs(cs_bounds).max(initial=0.0)))
    return {"primal_residual": primal, "dual_residual": dual, "complementarity_residual": comp}
