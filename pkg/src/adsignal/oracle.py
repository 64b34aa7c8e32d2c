"""Brute-force baselines used to check the solvers.

They share the LP code with the solvers and differ only in which posteriors
they hand to it: a dense q-uniform grid, or every single-minded vertex.
"""

from __future__ import annotations

import numpy as np

from .core import AuctionInstance, batch_revenue, solve_over_posteriors
from .errors import SizeGuardError
from .rv import DEFAULT_GRID_CAP, enumerate_q_uniform, expected_revenues
from .single_minded import SingleMindedStructure

MAX_SM_STATES = 20


def grid_opt(instance: AuctionInstance, q, cap=DEFAULT_GRID_CAP, distribution=None):
    """Optimal value over schemes supported on the q-uniform grid.

    With ``distribution=(matrices, probs)`` revenues are expectations over
    that finite distribution instead of ``instance.valuations``.
    """
    grid = enumerate_q_uniform(instance.d, q, cap=cap)
    if distribution is None:
        revs = batch_revenue(instance, grid.posteriors)
    else:
        M, p = distribution
        revs = expected_revenues(np.asarray(M, dtype=float), np.asarray(p, dtype=float),
                                 grid.posteriors, instance.lambdas)
    _, value, _ = solve_over_posteriors(instance, grid.posteriors, revs, stage="grid_opt")
    return value


def sm_vertices(sm: SingleMindedStructure):
    """Every single-minded vertex, one row per nonempty subset (bitmask order)."""
    d = sm.d
    if d > MAX_SM_STATES:
        raise SizeGuardError(f"exhaustive enumeration over {d} states (cap {MAX_SM_STATES})",
                             required=d, cap=MAX_SM_STATES)
    masks = np.arange(1, 1 << d)
    member = ((masks[:, None] >> np.arange(d)) & 1).astype(bool)
    inv = np.where(member, 1.0 / sm.deltas, 0.0)
    return inv / inv.sum(axis=1, keepdims=True), member


def exact_sm_separation(instance: AuctionInstance, sm: SingleMindedStructure, y):
    """Exact maximiser of ``Rev(xi) - y.xi`` over all single-minded vertices."""
    P, _ = sm_vertices(sm)
    obj = batch_revenue(instance, P) - P @ np.asarray(y, dtype=float)
    k = int(np.argmax(obj))
    return P[k], float(obj[k])


def exact_sm_opt(instance: AuctionInstance, sm: SingleMindedStructure):
    """Optimal value over schemes supported on single-minded vertices."""
    P, _ = sm_vertices(sm)
    _, value, _ = solve_over_posteriors(instance, P, stage="exact_sm_opt")
    return value
