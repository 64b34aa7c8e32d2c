"""Domain types, VCG mechanics and revenue evaluation.

Indices are 0-based throughout. Revenue at a posterior is the sum of VCG
payments when every bidder bids its expected valuation; bidders are
re-labelled by decreasing expected valuation (ties by index) and zero-valued
dummies pad the field to at least ``m + 1`` bidders.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import NumericalError, ValidationError
from .lp import LinearProgram, solve

PROB_TOL = 1e-12
WEIGHT_TOL = 1e-9
CONSISTENCY_TOL = 1e-7
PRUNE_TOL = 1e-12


def _vector(x, name):
    try:
        a = np.asarray(x, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{name}: not numeric", field=name) from exc
    if a.ndim != 1 or a.size == 0:
        raise ValidationError(f"{name}: expected a non-empty vector", field=name)
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name}: entries must be finite", field=name)
    return a


def check_distribution(p, name="prior", tol=PROB_TOL):
    """Validated probability vector (nonnegative, sums to one within ``tol``)."""
    p = _vector(p, name)
    if np.any(p < 0):
        raise ValidationError(f"{name}: negative entry", field=name)
    total = p.sum()
    if abs(total - 1.0) > tol:
        raise ValidationError(f"{name}: entries sum to {total:.12g}, expected 1", field=name)
    return p


def posterior(probs):
    """Validated posterior (a point of the state simplex)."""
    return check_distribution(probs, name="posterior")


def check_lambdas(lambdas):
    lam = _vector(lambdas, "lambdas")
    if np.any(lam < 0) or np.any(lam > 1):
        raise ValidationError("lambdas: click-through rates must lie in [0, 1]", field="lambdas")
    if np.any(np.diff(lam) > 0):
        raise ValidationError("lambdas: must be non-increasing", field="lambdas")
    return lam


def revenue_weights(lambdas):
    """``r[k]`` multiplies the (k+1)-th largest bid in the revenue sum.

    ``r[0] = 0`` and ``r[k] = k (lam_k - lam_{k+1})`` with ``lam_{m+1} = 0``.
    """
    lam = np.append(np.asarray(lambdas, dtype=float), 0.0)
    k = np.arange(1, lam.size)
    return np.concatenate([[0.0], k * (lam[:-1] - lam[1:])])


@dataclass(frozen=True)
class AuctionInstance:
    """n bidders, m slots, d states. ``valuations`` is n x d."""

    m: int
    lambdas: np.ndarray
    prior: np.ndarray
    valuations: np.ndarray

    def __post_init__(self):
        if isinstance(self.m, bool) or int(self.m) != self.m or self.m < 1:
            raise ValidationError("m: must be a positive integer", field="m")
        object.__setattr__(self, "m", int(self.m))
        lam = check_lambdas(self.lambdas)
        if lam.size != self.m:
            raise ValidationError(f"lambdas: expected {self.m} rates, got {lam.size}", field="lambdas")
        mu = check_distribution(self.prior, "prior")
        try:
            V = np.array(self.valuations, dtype=float)
        except (TypeError, ValueError) as exc:
            raise ValidationError("valuations: not a numeric matrix", field="valuations") from exc
        if V.ndim != 2 or V.shape[1] != mu.size or V.shape[0] == 0:
            raise ValidationError(f"valuations: expected an n x {mu.size} matrix", field="valuations")
        if not np.all(np.isfinite(V)) or np.any(V < 0) or np.any(V > 1):
            raise ValidationError("valuations: entries must lie in [0, 1]", field="valuations")
        if self.m > V.shape[0]:
            raise ValidationError("m: more slots than bidders", field="m")
        for arr in (lam, mu, V):
            arr.setflags(write=False)
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "prior", mu)
        object.__setattr__(self, "valuations", V)

    @property
    def n(self):
        return self.valuations.shape[0]

    @property
    def d(self):
        return self.prior.size

    @property
    def rweights(self):
        return revenue_weights(self.lambdas)

    def padded_valuations(self):
        """Valuation matrix with zero rows appended up to ``m + 1`` bidders."""
        short = self.m + 1 - self.n
        if short <= 0:
            return self.valuations
        return np.vstack([self.valuations, np.zeros((short, self.d))])

    def with_prior(self, prior):
        return AuctionInstance(self.m, self.lambdas, prior, self.valuations)

    def to_dict(self):
        return {"m": self.m, "lambdas": self.lambdas.tolist(), "prior": self.prior.tolist(),
                "valuations": self.valuations.tolist()}


@dataclass(frozen=True)
class SignalingScheme:
    """Distribution over posteriors: ``weights[k]`` on row ``posteriors[k]``."""

    weights: np.ndarray
    posteriors: np.ndarray

    def __post_init__(self):
        w = _vector(self.weights, "weights")
        P = np.atleast_2d(np.asarray(self.posteriors, dtype=float))
        if P.shape[0] != w.size:
            raise ValidationError("posteriors: one row per weight required", field="posteriors")
        if np.any(w <= 0):
            raise ValidationError("weights: must be positive", field="weights")
        if abs(w.sum() - 1.0) > WEIGHT_TOL:
            raise ValidationError(f"weights: sum to {w.sum():.12g}, expected 1", field="weights")
        if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1.0) > PROB_TOL * max(1, P.shape[1])):
            raise ValidationError("posteriors: each row must be a probability vector", field="posteriors")
        w.setflags(write=False)
        P.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "posteriors", P)

    @classmethod
    def from_weights(cls, weights, posteriors, prune=PRUNE_TOL):
        """Build from raw LP output: clip, prune dust, renormalise rows and weights."""
        w = np.clip(np.asarray(weights, dtype=float), 0.0, None)
        P = np.clip(np.atleast_2d(np.asarray(posteriors, dtype=float)), 0.0, None)
        total = w.sum()
        if total <= 0:
            raise NumericalError("scheme has no positive weight", stage="scheme")
        w = w / total
        keep = w >= prune
        w, P = w[keep], P[keep]
        P = P / P.sum(axis=1, keepdims=True)
        return cls(w / w.sum(), P)

    @classmethod
    def single(cls, xi):
        return cls(np.ones(1), np.atleast_2d(posterior(xi)))

    @property
    def atoms(self):
        return list(zip(self.weights.tolist(), self.posteriors))

    def __len__(self):
        return self.weights.size


@dataclass
class SolveReport:
    scheme: SignalingScheme
    value: float
    solver_id: str
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "value": float(self.value),
            "atoms": [{"weight": float(w), "posterior": [float(x) for x in p]} for w, p in self.scheme.atoms],
            "solver_id": self.solver_id,
            "diagnostics": _jsonable(self.diagnostics),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


# -- operations ---------------------------------------------------------------

def expected_valuations(instance: AuctionInstance, xi):
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (instance.d,):
        raise ValidationError(f"posterior: expected {instance.d} entries", field="posterior")
    return instance.valuations @ xi


def vcg_outcome(bids, lambdas):
    """Slot assignment and per-slot payments of VCG with the given bids.

    Returns ``(ordering, payments)``: ``ordering`` lists bidder indices by
    decreasing bid (ties by index) with zero dummies (indices ``>= n``)
    appended when fewer than ``m + 1`` bidders exist; ``payments[i]`` is what
    the bidder in slot ``i`` pays. Unallocated bidders pay nothing.
    """
    b = np.asarray(bids, dtype=float)
    lam = np.append(np.asarray(lambdas, dtype=float), 0.0)
    m = lam.size - 1
    if b.size < m + 1:
        b = np.concatenate([b, np.zeros(m + 1 - b.size)])
    ordering = np.argsort(-b, kind="stable")
    sb = b[ordering]
    payments = np.zeros(m)
    for i in range(m):
        j = np.arange(i + 1, m + 1)
        payments[i] = float(np.sum(sb[j] * (lam[j - 1] - lam[j])))
    return ordering, payments


def revenue(instance: AuctionInstance, xi):
    w = expected_valuations(instance, xi)
    return float(kernels.batch_revenue(w[None, :], instance.rweights)[0])


def batch_revenue(instance: AuctionInstance, posteriors):
    """Revenue at each row of ``posteriors`` (K x d)."""
    P = np.atleast_2d(np.asarray(posteriors, dtype=float))
    return kernels.batch_revenue(P @ instance.valuations.T, instance.rweights)


def consistency_residual(scheme: SignalingScheme, prior):
    mean = scheme.weights @ scheme.posteriors
    return float(np.abs(mean - np.asarray(prior, dtype=float)).max())


def scheme_revenue(instance: AuctionInstance, scheme: SignalingScheme, tol=CONSISTENCY_TOL):
    res = consistency_residual(scheme, instance.prior)
    if res > tol:
        raise ValidationError(f"scheme: consistency residual {res:.3g} exceeds {tol:.1g}", field="scheme")
    return float(scheme.weights @ batch_revenue(instance, scheme.posteriors))


def merge_duplicates(scheme: SignalingScheme, tol=1e-9):
    """Collapse atoms whose posteriors agree within ``tol`` (max-norm)."""
    keys = np.round(scheme.posteriors / tol).astype(np.int64) if tol > 0 else scheme.posteriors
    _, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    k = inverse.max() + 1
    weights = np.bincount(inverse, weights=scheme.weights, minlength=k)
    post = np.zeros((k, scheme.posteriors.shape[1]))
    np.add.at(post, inverse, scheme.weights[:, None] * scheme.posteriors)
    return SignalingScheme.from_weights(weights, post / weights[:, None])


def export_signals(scheme: SignalingScheme, prior):
    """Per-state signal distributions ``phi[theta, s]`` (one signal per atom).

    Returns ``(phi, unreachable)``; states with zero prior mass get a uniform
    row and are flagged in the boolean mask ``unreachable``.
    """
    mu = np.asarray(prior, dtype=float)
    joint = scheme.posteriors.T * scheme.weights[None, :]  # d x k
    unreachable = mu <= 0
    phi = np.empty_like(joint)
    ok = ~unreachable
    phi[ok] = joint[ok] / mu[ok, None]
    phi[unreachable] = 1.0 / joint.shape[1]
    # absorb rounding so each row is an exact distribution
    phi[ok] = np.clip(phi[ok], 0.0, None)
    phi[ok] /= phi[ok].sum(axis=1, keepdims=True)
    return phi, unreachable


def posteriors_from_signals(phi, prior):
    """Bayes update: signal probabilities and the posterior each signal induces."""
    mu = np.asarray(prior, dtype=float)
    joint = mu[:, None] * np.asarray(phi, dtype=float)  # d x k
    probs = joint.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        post = (joint / probs[None, :]).T
    return probs, post


def solve_over_posteriors(instance: AuctionInstance, posteriors, revenues=None, stage="lp3"):
    """Best consistent scheme supported on the given posteriors.

    Returns ``(scheme, lp_value, lp_solution)``. Raises ``NumericalError`` if
    the prior is not a mixture of ``posteriors`` or the LP fails.
    """
    P = np.atleast_2d(np.asarray(posteriors, dtype=float))
    if revenues is None:
        revenues = batch_revenue(instance, P)
    # sum(gamma) = 1 follows from the d consistency rows
    lp = LinearProgram(np.asarray(revenues, dtype=float), P.T, instance.prior)
    sol = solve(lp)
    if not sol.optimal:
        raise NumericalError(f"{stage}: LP status {sol.status.value}", stage=stage)
    scheme = SignalingScheme.from_weights(sol.x, P)
    return scheme, sol.value, sol
