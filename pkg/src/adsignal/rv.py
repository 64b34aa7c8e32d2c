"""Random valuations: sampling oracles, empirical distributions, q-uniform
posterior grids and the parameter schedules of the three approximation
regimes.

Every regime runs the same pipeline: pick a grid resolution ``q`` and a
sample count ``s``, draw ``s`` valuation matrices, and solve the posterior
LP over the q-uniform grid against the empirical distribution.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass

import numpy as np

from .core import SignalingScheme, SolveReport, check_distribution, check_lambdas, consistency_residual, revenue_weights
from . import kernels
from .errors import NumericalError, SizeGuardError, ValidationError
from .lp import LinearProgram, solve

DEFAULT_GRID_CAP = 200_000
DEFAULT_SAMPLE_CAP = 1_000_000
SEED_CHUNK = 4096


class Regime(enum.Enum):
    FIXED_D = "fixed-d"
    FIXED_M = "fixed-m"
    BOUNDED_AWAY = "bounded-away"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        for r in cls:
            if r.value == key:
                return r
        raise ValidationError(f"regime: unknown regime {value!r}", field="regime")


# -- oracles --------------------------------------------------------------------

class ValuationOracle:
    """Source of i.i.d. valuation matrices. Subclasses implement ``sample``."""

    n: int
    d: int

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def support(self):
        """``(matrices, probs)`` when the distribution is finite, else None."""
        return None


class FiniteOracle(ValuationOracle):
    def __init__(self, matrices, probs=None):
        M = np.asarray(matrices, dtype=float)
        if M.ndim != 3 or M.shape[0] == 0:
            raise ValidationError("distribution.matrices: expected a list of n x d matrices",
                                  field="distribution.matrices")
        if np.any(M < 0) or np.any(M > 1) or not np.all(np.isfinite(M)):
            raise ValidationError("distribution.matrices: entries must lie in [0, 1]",
                                  field="distribution.matrices")
        if probs is None:
            probs = np.full(M.shape[0], 1.0 / M.shape[0])
        p = check_distribution(probs, "distribution.probs")
        if p.size != M.shape[0]:
            raise ValidationError("distribution.probs: one probability per matrix", field="distribution.probs")
        self.matrices, self.probs = M, p
        self.n, self.d = M.shape[1], M.shape[2]

    def sample(self, rng, size):
        return self.matrices[rng.choice(self.probs.size, size=size, p=self.probs)]

    def support(self):
        return self.matrices, self.probs


class FixedOracle(FiniteOracle):
    """Degenerate distribution: always the same matrix."""

    def __init__(self, V):
        super().__init__(np.asarray(V, dtype=float)[None])


class BetaOracle(ValuationOracle):
    """Independent Beta(a, b) entries."""

    def __init__(self, n, d, a=1.0, b=1.0):
        self.n, self.d, self.a, self.b = int(n), int(d), float(a), float(b)

    def sample(self, rng, size):
        return rng.beta(self.a, self.b, size=(size, self.n, self.d))


def draw_samples(oracle: ValuationOracle, s: int, seed=None):
    """``s`` matrices; chunk ``k`` always comes from child seed ``k``."""
    children = np.random.SeedSequence(seed).spawn(max(1, math.ceil(s / SEED_CHUNK)))
    parts = []
    left = s
    for child in children:
        take = min(SEED_CHUNK, left)
        parts.append(oracle.sample(np.random.default_rng(child), take))
        left -= take
        if left <= 0:
            break
    return np.concatenate(parts, axis=0)


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Uniform distribution over ``s`` samples, stored as distinct matrices."""

    matrices: np.ndarray  # k x n x d distinct matrices
    counts: np.ndarray    # multiplicities, summing to s

    @classmethod
    def from_samples(cls, samples):
        S = np.asarray(samples, dtype=float)
        if S.ndim != 3 or S.shape[0] == 0:
            raise ValidationError("samples: need at least one n x d matrix", field="samples")
        flat = S.reshape(S.shape[0], -1)
        uniq, counts = np.unique(flat, axis=0, return_counts=True)
        return cls(uniq.reshape(-1, S.shape[1], S.shape[2]), counts)

    @property
    def size(self):
        return int(self.counts.sum())

    @property
    def probs(self):
        return self.counts / self.counts.sum()

    def revenues(self, posteriors, lambdas, chunk=1 << 22):
        """Empirical revenue at every row of ``posteriors``."""
        return expected_revenues(self.matrices, self.probs, posteriors, lambdas, chunk)


def expected_revenues(matrices, probs, posteriors, lambdas, chunk=1 << 22):
    P = np.atleast_2d(np.asarray(posteriors, dtype=float))
    lam = np.asarray(lambdas, dtype=float)
    r = revenue_weights(lam)
    m = lam.size
    k, n, _ = matrices.shape
    total = np.zeros(P.shape[0])
    pad = max(0, m + 1 - n)
    rows = max(1, chunk // max(1, n * P.shape[0]))
    for start in range(0, k, rows):
        M = matrices[start:start + rows]
        W = np.einsum("knd,pd->kpn", M, P).reshape(-1, n)
        if pad:
            W = np.hstack([W, np.zeros((W.shape[0], pad))])
        rev = kernels.batch_revenue(W, r).reshape(M.shape[0], P.shape[0])
        total += probs[start:start + rows] @ rev
    return total


def empirical_revenue(emp: EmpiricalDistribution, lambdas, xi):
    return float(emp.revenues(np.asarray(xi, dtype=float)[None], lambdas)[0])


# -- grids and schedules --------------------------------------------------------------

@dataclass(frozen=True)
class QGrid:
    q: int
    posteriors: np.ndarray

    def __len__(self):
        return self.posteriors.shape[0]


def q_grid_size(d, q):
    return math.comb(q + d - 1, d - 1)


def _compositions(q, d):
    """All d-part compositions of q in lexicographic order."""
    if d == 1:
        return np.array([[q]], dtype=np.int64)
    out = []
    for first in range(q + 1):
        rest = _compositions(q - first, d - 1)
        out.append(np.hstack([np.full((rest.shape[0], 1), first, dtype=np.int64), rest]))
    return np.vstack(out)


def enumerate_q_uniform(d, q, cap=DEFAULT_GRID_CAP):
    if int(d) != d or d < 1:
        raise ValidationError("d: must be a positive integer", field="d")
    if int(q) != q or q < 1:
        raise ValidationError("q: must be a positive integer", field="q")
    d, q = int(d), int(q)
    size = q_grid_size(d, q)
    if cap is not None and size > cap:
        raise SizeGuardError(f"q-grid with q={q}, d={d} has {size} posteriors (cap {cap})",
                             required=size, cap=cap)
    return QGrid(q, _compositions(q, d) / q)


def required_samples(rho, tau, lambda1, m):
    if not 0 < rho < 1:
        raise ValidationError("rho: must lie in (0, 1)", field="rho")
    if tau <= 0:
        raise ValidationError("tau: must be positive", field="tau")
    return max(1, math.ceil(2 * (lambda1 * m) ** 2 / tau ** 2 * math.log(2 / rho)))


def choose_q(regime, m, d=None, lam=None, eta=None):
    """Grid resolution: ``ceil(m d / lam)`` for fixed d, otherwise
    ``ceil(log((m+1)/eta) / (2 eta^2))``."""
    regime = Regime.parse(regime)
    if regime is Regime.FIXED_D:
        if lam is None or lam <= 0 or d is None or d < 1:
            raise ValidationError("lambda: must be positive for the fixed-d regime", field="lambda")
        return max(1, math.ceil(m * d / lam))
    if eta is None or eta <= 0:
        raise ValidationError("eta: must be positive", field="eta")
    return max(1, math.ceil(math.log((m + 1) / eta) / (2 * eta ** 2)))


def rv_schedule(regime, target, m, d, lambda1, delta=None):
    """Parameters (q, tau, alpha, rho, grid size, samples) for a regime."""
    regime = Regime.parse(regime)
    if target <= 0:
        raise ValidationError("eps: target error must be positive", field="eps")
    if regime is Regime.FIXED_D:
        q = choose_q(regime, m, d=d, lam=target / 3)
        size = q_grid_size(d, q)
        tau = target / 6
        alpha = target / (3 * size)
        rho = alpha / m
    elif regime is Regime.FIXED_M:
        q = choose_q(regime, m, eta=target / (6 * m))
        size = q_grid_size(d, q)
        tau = target / 3
        alpha = target / (3 * size)
        rho = alpha / m
    else:
        if delta is None or not 0 < delta <= 1:
            raise ValidationError("delta: bounded-away regime needs delta in (0, 1]", field="delta")
        if target >= 1:
            raise ValidationError("eps: multiplicative target must be below 1", field="eps")
        nu = target / 4
        q = choose_q(regime, m, eta=delta * target / 2)
        size = q_grid_size(d, q)
        tau = nu * delta * lambda1
        alpha = target / (4 * size)
        rho = alpha
    rho = min(rho, 0.999999)
    s = required_samples(rho, tau, lambda1, m)
    return {"regime": regime.value, "q": q, "grid_size": size, "tau": tau, "alpha": alpha,
            "rho": rho, "samples": s}


def solve_rv(oracle: ValuationOracle, m, lambdas, prior, regime, target_error, delta=None,
             seed=None, q_cap=DEFAULT_GRID_CAP, sample_cap=DEFAULT_SAMPLE_CAP) -> SolveReport:
    start = time.perf_counter()
    lam = check_lambdas(lambdas)
    if lam.size != m:
        raise ValidationError(f"lambdas: expected {m} rates", field="lambdas")
    mu = check_distribution(prior, "prior")
    if mu.size != oracle.d:
        raise ValidationError(f"prior: expected {oracle.d} entries", field="prior")
    if m > oracle.n:
        raise ValidationError("m: more slots than bidders", field="m")
    regime = Regime.parse(regime)
    if regime is Regime.BOUNDED_AWAY and delta is not None:
        support = oracle.support()
        if support is not None and support[0].min() < delta:
            raise ValidationError("delta: some valuation lies below delta", field="delta")
    sched = rv_schedule(regime, target_error, m, oracle.d, float(lam[0]), delta)
    problems = []
    if q_cap is not None and sched["grid_size"] > q_cap:
        problems.append(f"grid size {sched['grid_size']} (q={sched['q']}) exceeds cap {q_cap}")
    if sample_cap is not None and sched["samples"] > sample_cap:
        problems.append(f"sample count {sched['samples']} exceeds cap {sample_cap}")
    if problems:
        raise SizeGuardError("rv schedule: " + "; ".join(problems),
                             required={"grid_size": sched["grid_size"], "samples": sched["samples"]},
                             cap={"grid_size": q_cap, "samples": sample_cap})
    grid = enumerate_q_uniform(oracle.d, sched["q"], cap=None)
    emp = EmpiricalDistribution.from_samples(draw_samples(oracle, sched["samples"], seed))
    revs = emp.revenues(grid.posteriors, lam)
    sol = solve(LinearProgram(revs, grid.posteriors.T, mu))
    if not sol.optimal:
        raise NumericalError(f"rv LP status {sol.status.value}", stage="rv_lp")
    scheme = SignalingScheme.from_weights(sol.x, grid.posteriors)
    value = float(scheme.weights @ emp.revenues(scheme.posteriors, lam))
    diag = dict(sched)
    diag.update({
        "distinct_samples": int(emp.counts.size),
        "lp_value": sol.value,
        "consistency_residual": consistency_residual(scheme, mu),
        "seed": seed,
    })
    support = oracle.support()
    if support is not None:
        diag["true_value"] = float(scheme.weights @ expected_revenues(support[0], support[1], scheme.posteriors, lam))
    diag["wall_time_s"] = time.perf_counter() - start
    return SolveReport(scheme, value, f"rv-{regime.value}", diag)
