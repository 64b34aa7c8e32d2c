"""FPTAS for single-minded bidders.

Each bidder values exactly one state, and all bidders of state ``theta``
share the value ``delta[theta]``. The candidate posteriors are then the
vertices ``sm_vertex(S)`` indexed by nonempty state subsets ``S``.

Pipeline: bisection on an objective threshold ``rho``; for each threshold the
ellipsoid method decides the relaxed dual system, calling a knapsack-style DP
as approximate separation oracle; the posteriors that produced cuts in the
last infeasible run define a small primal LP whose solution is made exactly
consistent with the prior.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import (AuctionInstance, SignalingScheme, SolveReport, batch_revenue, check_distribution,
                   consistency_residual, revenue_weights, scheme_revenue)
from .errors import NumericalError, ValidationError
from .lp import LinearProgram, solve


@dataclass(frozen=True)
class SingleMindedStructure:
    """``groups[i]`` is the state bidder ``i`` values; ``deltas[theta]`` its value."""

    groups: np.ndarray
    deltas: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.groups)
        dl = np.asarray(self.deltas, dtype=float)
        if dl.ndim != 1 or dl.size == 0:
            raise ValidationError("single_minded.deltas: expected a non-empty vector", field="single_minded.deltas")
        if np.any(~np.isfinite(dl)) or np.any(dl <= 0) or np.any(dl > 1):
            raise ValidationError("single_minded.deltas: values must lie in (0, 1]", field="single_minded.deltas")
        if g.ndim != 1 or g.size == 0 or not np.issubdtype(g.dtype, np.integer):
            raise ValidationError("single_minded.groups: expected one integer state per bidder",
                                  field="single_minded.groups")
        if np.any(g < 0) or np.any(g >= dl.size):
            raise ValidationError("single_minded.groups: state index out of range", field="single_minded.groups")
        g = g.astype(np.int64)
        g.setflags(write=False)
        dl.setflags(write=False)
        object.__setattr__(self, "groups", g)
        object.__setattr__(self, "deltas", dl)

    @property
    def n(self):
        return self.groups.size

    @property
    def d(self):
        return self.deltas.size

    @property
    def sizes(self):
        return np.bincount(self.groups, minlength=self.d)

    def valuations(self):
        V = np.zeros((self.n, self.d))
        V[np.arange(self.n), self.groups] = self.deltas[self.groups]
        return V

    def instance(self, m, lambdas, prior):
        return AuctionInstance(m, lambdas, prior, self.valuations())

    def matches(self, valuations, tol=1e-12):
        V = np.asarray(valuations, dtype=float)
        return V.shape == (self.n, self.d) and bool(np.abs(V - self.valuations()).max() <= tol)

    def restricted(self, states):
        """Structure on a subset of states; bidders of dropped states vanish."""
        states = np.asarray(states)
        remap = -np.ones(self.d, dtype=np.int64)
        remap[states] = np.arange(states.size)
        keep = remap[self.groups] >= 0
        return SingleMindedStructure(remap[self.groups][keep], self.deltas[states]), keep


@dataclass(frozen=True)
class DualPoint:
    y: np.ndarray
    t: float

    def check(self, beta, tol=1e-12):
        y = np.asarray(self.y)
        return bool(np.all(y <= tol) and np.all(y >= -beta - tol) and y.sum() >= -beta - tol)


@dataclass(frozen=True)
class RelaxationConfig:
    """``beta`` relaxation weight, ``eta`` bisection gap, ``lambda_acc`` oracle
    accuracy, ``epsilon_dp`` a-priori DP grid step. ``c_start`` is the first
    DP resolution tried; the DP doubles up to ``c_cap`` (default ``1/epsilon_dp``)."""

    beta: float
    eta: float
    lambda_acc: float
    epsilon_dp: float
    c_start: int = 32
    c_cap: int | None = None

    def __post_init__(self):
        for name in ("beta", "eta", "lambda_acc", "epsilon_dp"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name}: must be positive", field=name)

    @property
    def c_max(self):
        cmax = math.ceil(1.0 / self.epsilon_dp)
        return cmax if self.c_cap is None else min(cmax, int(self.c_cap))

    @staticmethod
    def dp_step(lambda_acc, d, m, beta):
        """Largest grid step for which the DP's worst-case error is ``lambda_acc``."""
        return lambda_acc / (2 * d * m + d * d * beta + 2 * d * beta)

    @classmethod
    def from_target(cls, eps, d, m, **kw):
        if not eps > 0:
            raise ValidationError("eps: must be positive", field="eps")
        beta = 3 * d * m * m / eps
        lam = eps / 3
        return cls(beta=beta, eta=eps / 3, lambda_acc=lam, epsilon_dp=cls.dp_step(lam, d, m, beta), **kw)


# -- vertices and counting revenue ----------------------------------------------

def sm_vertex(subset, deltas):
    """Posterior with ``delta[theta] * xi[theta]`` equal on ``subset``, zero elsewhere."""
    S = sorted(set(int(s) for s in subset))
    if not S:
        raise ValidationError("subset: must be nonempty", field="subset")
    dl = np.asarray(deltas, dtype=float)
    if np.any(dl[S] <= 0):
        raise ValidationError("deltas: must be positive on the subset", field="deltas")
    xi = np.zeros(dl.size)
    inv = 1.0 / dl[S]
    xi[S] = inv / inv.sum()
    return xi


def count_factors(lambdas):
    """``F[j]`` for j = 0..m+1: revenue per unit value when j bidders tie."""
    return np.concatenate([[0.0], np.cumsum(revenue_weights(lambdas))])


def f_revenue(v, j, lambdas):
    F = count_factors(lambdas)
    return float(v * F[min(max(int(j), 0), F.size - 1)])


def subset_objective(subset, sm: SingleMindedStructure, F, y):
    """Exact ``Rev - y.xi`` at ``sm_vertex(subset)``, using the counting form."""
    S = np.asarray(sorted(subset))
    v = 1.0 / np.sum(1.0 / sm.deltas[S])
    J = int(sm.sizes[S].sum())
    return v * F[min(J, F.size - 1)] - v * float(np.sum(np.asarray(y)[S] / sm.deltas[S]))


# -- DP separation -----------------------------------------------------------------

@dataclass
class Separation:
    posterior: np.ndarray
    value: float          # exact objective of ``posterior``
    upper_bound: float    # certified bound on the true maximum
    subset: tuple
    c: int                # final DP resolution
    dp_calls: int
    grid_points: int


def _grid(deltas, c):
    steps = np.arange(1, c + 1) / c
    return np.unique(np.outer(deltas, steps).ravel())[::-1].copy()


def dp_search(sm: SingleMindedStructure, lambdas, y, config: RelaxationConfig, threshold=None):
    """Adaptive DP separation.

    Doubles the DP resolution until the certified gap is at most
    ``lambda_acc``, or, when ``threshold`` is given, until the answer to
    "is the maximum above threshold?" is settled, or the cap is reached.
    """
    y = np.asarray(y, dtype=float)
    d = sm.d
    F_full = count_factors(lambdas)
    n_total = int(sm.sizes.sum())
    jcap = min(n_total, F_full.size - 1)
    F = F_full[:jcap + 1]
    shift = float(y.max())
    yp = y - shift  # uniform shift: exact because posteriors sum to one
    b = -yp / sm.deltas
    sizes = sm.sizes.astype(np.int_)

    # single-state vertices are always candidates
    best_val, best_subset = -np.inf, None
    for th in range(d):
        val = subset_objective([th], sm, F_full, y)
        if val > best_val:
            best_val, best_subset = val, (th,)

    c_max = max(config.c_max, 1)
    c = min(max(config.c_start, 2 * d + 1), c_max)
    calls = points = 0
    ub = np.inf
    while True:
        G = _grid(sm.deltas, c)
        vals, evaluated = kernels.dp_best_values(G, sm.deltas, b, sizes, F, c, jcap)
        calls += 1
        points += evaluated
        t = int(np.argmax(vals))
        if np.isfinite(vals[t]):
            subset, dp_val = kernels.dp_traceback(G[t], sm.deltas, b, sizes, F, c, jcap)
            if subset:
                val = subset_objective(subset, sm, F_full, y)
                if val > best_val:
                    best_val, best_subset = val, tuple(subset)
            dp_best = float(vals[t])
            if c > 2 * d:
                ub = min(ub, max(dp_best / (1.0 - 2.0 * d / c) - shift, best_val))
        gap = ub - best_val
        if threshold is not None and (best_val > threshold or ub <= threshold + config.lambda_acc):
            break
        if gap <= config.lambda_acc or c >= c_max:
            break
        c = min(2 * c, c_max)
    return Separation(sm_vertex(best_subset, sm.deltas), float(best_val), float(ub), best_subset,
                      c, calls, points)


def dp_separation(instance: AuctionInstance, sm: SingleMindedStructure, y, config: RelaxationConfig):
    """Approximately maximise ``Rev(xi) - y.xi`` over single-minded vertices.

    Returns ``(posterior, value)`` with ``value`` the exact objective of the
    returned posterior, within ``lambda_acc`` of the maximum.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (sm.d,):
        raise ValidationError(f"y: expected {sm.d} entries", field="y")
    if np.any(y > 1e-12) or np.any(y < -config.beta - 1e-9):
        raise ValidationError("y: entries must lie in [-beta, 0]", field="y")
    sep = dp_search(sm, instance.lambdas, y, config)
    return sep.posterior, sep.value


# -- ellipsoid -------------------------------------------------------------------------

@dataclass
class EllipsoidResult:
    feasible: bool
    H: np.ndarray                 # posteriors whose cuts were used (rows)
    point: np.ndarray             # last centre (y, t)
    iterations: int
    exhausted: bool = False       # hit the iteration cap or a numerical breakdown
    diagnostics: dict = field(default_factory=dict)


class CutPool:
    """Posteriors found so far, with their exact revenues."""

    def __init__(self, d):
        self.posteriors = np.zeros((0, d))
        self.revenues = np.zeros(0)
        self._keys = set()

    def add(self, xi, rev):
        key = tuple(np.round(xi, 12))
        if key in self._keys:
            return
        self._keys.add(key)
        self.posteriors = np.vstack([self.posteriors, xi])
        self.revenues = np.append(self.revenues, rev)

    def __len__(self):
        return self.revenues.size


def ellipsoid_feasibility(instance: AuctionInstance, sm: SingleMindedStructure, rho3, config: RelaxationConfig,
                          pool: CutPool | None = None):
    """Decide ``{(y, t): y <= 0, sum y >= -beta, y.mu + t <= rho3,
    t >= Rev(xi) - y.xi for all vertices xi}`` approximately."""
    d = instance.d
    n = d + 1
    beta = config.beta
    mu = instance.prior
    top = float(instance.lambdas[0]) * instance.m + beta
    pool = pool if pool is not None else CutPool(d)

    lo = np.concatenate([np.full(d, -beta), [0.0]])
    hi = np.concatenate([np.zeros(d), [top]])
    x = (lo + hi) / 2
    R = 0.5 * float(np.linalg.norm(hi - lo))
    r = config.eta / (d + 1)
    P = np.eye(n) * R * R
    logdet = 2 * n * math.log(R)
    log_floor = 2 * n * math.log(r)
    cap = math.ceil(2 * n * (n + 1) * math.log(R / r)) + 1

    used = {}
    stats = {"dp_calls": 0, "dp_undecided": 0, "max_c": 0, "pool_cuts": 0, "dp_cuts": 0, "max_oracle_gap": 0.0}
    mu_row = np.concatenate([mu, [1.0]])

    def result(feasible, it, exhausted=False):
        H = np.array(list(used.values())) if used else np.zeros((0, d))
        stats["logdet"] = logdet
        return EllipsoidResult(feasible, H, x.copy(), it, exhausted, stats)

    for it in range(cap):
        y, t = x[:d], x[d]
        a = None
        if np.any(y > 0):
            th = int(np.argmax(y))
            a = np.zeros(n)
            a[th] = 1.0
            b = 0.0
        elif -y.sum() > beta:
            a = np.concatenate([-np.ones(d), [0.0]])
            b = beta
        elif mu_row @ x > rho3:
            a, b = mu_row, rho3
        else:
            if len(pool):
                viol = pool.revenues - pool.posteriors @ y - t
                k = int(np.argmax(viol))
                if viol[k] > 0:
                    xi = pool.posteriors[k]
                    a = np.concatenate([-xi, [-1.0]])
                    b = -pool.revenues[k]
                    used.setdefault(tuple(np.round(xi, 12)), xi)
                    stats["pool_cuts"] += 1
            if a is None:
                sep = dp_search(sm, instance.lambdas, np.clip(y, -beta, 0.0), config, threshold=t)
                stats["dp_calls"] += 1
                stats["max_c"] = max(stats["max_c"], sep.c)
                if sep.value > t:
                    xi = sep.posterior
                    rev = float(batch_revenue(instance, xi[None])[0])
                    pool.add(xi, rev)
                    a = np.concatenate([-xi, [-1.0]])
                    b = -rev
                    used.setdefault(tuple(np.round(xi, 12)), xi)
                    stats["dp_cuts"] += 1
                else:
                    if sep.upper_bound > t + config.lambda_acc:
                        stats["dp_undecided"] += 1
                        stats["max_oracle_gap"] = max(stats["max_oracle_gap"], sep.upper_bound - sep.value)
                    return result(True, it)
        Pa = P @ a
        aPa = float(a @ Pa)
        if not aPa > 0 or not np.isfinite(aPa):
            stats["breakdown"] = True
            return result(True, it, exhausted=True)
        root = math.sqrt(aPa)
        alpha = (float(a @ x) - b) / root
        if alpha >= 1.0:
            return result(False, it)
        g = Pa / root
        tau = 2 * (1 + n * alpha) / ((n + 1) * (1 + alpha))
        scale = n * n * (1 - alpha * alpha) / (n * n - 1)
        x = x - (1 + n * alpha) / (n + 1) * g
        P = scale * (P - tau * np.outer(g, g))
        P = (P + P.T) / 2
        logdet += n * math.log(scale) + math.log1p(-tau)
        if logdet < log_floor:
            return result(False, it + 1)
    return result(True, cap, exhausted=True)


# -- full solver -------------------------------------------------------------------------

def reduced_primal(instance: AuctionInstance, posteriors, beta):
    """Relaxed primal over the given posteriors plus every point mass.

    Returns ``(columns, gamma, z, lp_value)``.
    """
    d = instance.d
    cols = np.vstack([posteriors, np.eye(d)]) if len(posteriors) else np.eye(d)
    cols = np.unique(np.round(cols, 15), axis=0)
    revs = batch_revenue(instance, cols)
    K = cols.shape[0]
    obj = np.concatenate([revs, [beta]])
    a_ge = np.hstack([cols.T, -np.ones((d, 1))])
    a_eq = np.concatenate([np.ones(K), [0.0]])[None]
    lower = np.concatenate([np.zeros(K), [-np.inf]])
    upper = np.concatenate([np.full(K, np.inf), [0.0]])
    sol = solve(LinearProgram(obj, a_eq, [1.0], a_ge, instance.prior, lower, upper))
    if not sol.optimal:
        raise NumericalError(f"reduced primal LP status {sol.status.value}", stage="reduced_primal")
    gamma = np.clip(sol.x[:K], 0.0, None)
    return cols, gamma, float(sol.x[K]), sol.value


def recover_consistent(cols, gamma, prior, d, m, beta):
    """Scale the LP mixture down and top it up with point masses so that it
    matches the prior exactly. Returns ``(weights over cols + e_theta, scale)``."""
    mu = np.asarray(prior, dtype=float)
    gamma = gamma / gamma.sum()
    mean = gamma @ cols
    s = 1.0 - d * m / beta
    pos = mean > 0
    if np.any(pos):
        s = min(s, float(np.min(mu[pos] / mean[pos])))
    s = max(s, 0.0)
    correction = np.clip(mu - s * mean, 0.0, None)
    weights = np.concatenate([s * gamma, correction])
    posts = np.vstack([cols, np.eye(d)])
    return weights, posts, s


def solve_single_minded(instance: AuctionInstance, sm: SingleMindedStructure, target_eps,
                        config: RelaxationConfig | None = None) -> SolveReport:
    start = time.perf_counter()
    if not sm.matches(instance.valuations):
        raise ValidationError("single_minded: structure does not match the valuations", field="single_minded")
    if not target_eps > 0:
        raise ValidationError("eps: must be positive", field="eps")

    # states outside the prior's support carry no mass in any consistent scheme
    support = np.flatnonzero(instance.prior > 0)
    full_d = instance.d
    if support.size < full_d and not np.isin(sm.groups, support).any():
        # nobody values a reachable state: revenue is zero under every scheme
        scheme = SignalingScheme.single(instance.prior)
        return SolveReport(scheme, scheme_revenue(instance, scheme), "single-minded",
                           {"consistency_residual": 0.0, "bisection": [],
                            "wall_time_s": time.perf_counter() - start})
    if support.size < full_d:
        sub_sm, keep = sm.restricted(support)
        prior = check_distribution(instance.prior[support] / instance.prior[support].sum())
        V = instance.valuations[np.ix_(keep, support)]
        if V.shape[0] < instance.m:
            # zero-valued filler bidders change no revenue
            V = np.vstack([V, np.zeros((instance.m - V.shape[0], support.size))])
        work = AuctionInstance(instance.m, instance.lambdas, prior, V)
    else:
        work, sub_sm = instance, sm

    d, m = work.d, work.m
    if config is None:
        config = RelaxationConfig.from_target(target_eps, d, m)
    beta, eta = config.beta, config.eta

    rho1, rho2 = 0.0, float(work.lambdas[0]) * m + beta
    pool = CutPool(d)
    H_star = np.zeros((0, d))
    trace = []
    totals = {"ellipsoid_runs": 0, "ellipsoid_iterations": 0, "dp_calls": 0, "dp_undecided": 0,
              "exhausted_runs": 0, "max_c": 0, "max_oracle_gap": 0.0}
    while rho2 - rho1 > eta:
        rho3 = 0.5 * (rho1 + rho2)
        res = ellipsoid_feasibility(work, sub_sm, rho3, config, pool)
        totals["ellipsoid_runs"] += 1
        totals["ellipsoid_iterations"] += res.iterations
        totals["dp_calls"] += res.diagnostics["dp_calls"]
        totals["dp_undecided"] += res.diagnostics["dp_undecided"]
        totals["exhausted_runs"] += int(res.exhausted)
        totals["max_c"] = max(totals["max_c"], res.diagnostics["max_c"])
        totals["max_oracle_gap"] = max(totals["max_oracle_gap"], res.diagnostics["max_oracle_gap"])
        trace.append({"rho": rho3, "feasible": res.feasible, "cuts": int(len(res.H))})
        if res.feasible:
            rho2 = rho3
        else:
            rho1 = rho3
            H_star = res.H

    cols, gamma, z, lp_value = reduced_primal(work, H_star, beta)
    weights, posts, s = recover_consistent(cols, gamma, work.prior, d, m, beta)
    if support.size < full_d:
        embedded = np.zeros((posts.shape[0], full_d))
        embedded[:, support] = posts
        posts = embedded
    scheme = SignalingScheme.from_weights(weights, posts)
    value = scheme_revenue(instance, scheme)
    diag = dict(totals)
    diag.update({
        "beta": beta, "eta": eta, "lambda_acc": config.lambda_acc, "epsilon_dp": config.epsilon_dp,
        "c_max": config.c_max, "rho_lower": rho1, "rho_upper": rho2, "bisection": trace,
        "H_size": int(H_star.shape[0]), "pool_size": len(pool), "reduced_lp_value": lp_value, "z": z,
        "recovery_scale": s, "consistency_residual": consistency_residual(scheme, instance.prior),
        "wall_time_s": time.perf_counter() - start,
    })
    return SolveReport(scheme, value, "single-minded", diag)
