"""Exact solvers when valuations are known.

``solve_fixed_m`` builds one LP over every ordered (m+1)-tuple of bidders;
``solve_fixed_d`` enumerates the vertices of all ordering regions and solves
the posterior LP over them.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass

import numpy as np

from .core import (AuctionInstance, SignalingScheme, SolveReport, batch_revenue,
                   consistency_residual, scheme_revenue, solve_over_posteriors)
from .errors import NumericalError, SizeGuardError
from .lp import LinearProgram, solve

MAX_FIXED_M_VARS = 5_000_000
MAX_DENSE_ENTRIES = 50_000_000
MAX_SUBSETS = 10_000_000
VERTEX_TOL = 1e-9


@dataclass(frozen=True)
class OrderingRegion:
    """Posteriors under which ``permutation`` lists bidders by decreasing value."""

    permutation: tuple

    def __post_init__(self):
        if len(set(self.permutation)) != len(self.permutation):
            raise ValueError("permutation indices must be distinct")

    def constraint_matrix(self, valuations):
        """Rows ``a`` with ``a . xi >= 0`` describing the region."""
        V = np.asarray(valuations)
        p = list(self.permutation)
        return V[p[:-1]] - V[p[1:]]

    def contains(self, valuations, xi, tol=VERTEX_TOL):
        return bool(np.all(self.constraint_matrix(valuations) @ xi >= -tol))


def top_ordering(instance: AuctionInstance, xi):
    """Tie-broken top-(m+1) bidder tuple (padded indices) at ``xi``."""
    w = instance.padded_valuations() @ np.asarray(xi, dtype=float)
    return tuple(np.argsort(-w, kind="stable")[: instance.m + 1].tolist())


def merge_same_region(instance: AuctionInstance, scheme: SignalingScheme):
    """Merge atoms sharing a top-(m+1) ordering into their weighted mean."""
    groups = {}
    for k, xi in enumerate(scheme.posteriors):
        groups.setdefault(top_ordering(instance, xi), []).append(k)
    weights, posts = [], []
    for idx in groups.values():
        w = scheme.weights[idx]
        weights.append(w.sum())
        posts.append(w @ scheme.posteriors[idx] / w.sum())
    return SignalingScheme.from_weights(np.array(weights), np.array(posts))


def fixed_m_size(instance: AuctionInstance):
    n_pad = max(instance.n, instance.m + 1)
    tuples = math.perm(n_pad, instance.m + 1)
    return tuples, tuples * instance.d


def solve_fixed_m(instance: AuctionInstance) -> SolveReport:
    start = time.perf_counter()
    tuples_count, nvars = fixed_m_size(instance)
    if nvars > MAX_FIXED_M_VARS:
        raise SizeGuardError(f"fixed-m LP needs {nvars} variables (cap {MAX_FIXED_M_VARS})",
                             required=nvars, cap=MAX_FIXED_M_VARS)
    m, d = instance.m, instance.d
    rows = d + tuples_count * m
    if rows * nvars > MAX_DENSE_ENTRIES:
        raise SizeGuardError(f"fixed-m LP needs a {rows} x {nvars} dense matrix",
                             required=rows * nvars, cap=MAX_DENSE_ENTRIES)
    V = instance.padded_valuations()
    r = instance.rweights
    perms = np.array(list(itertools.permutations(range(V.shape[0]), m + 1)), dtype=int)
    # variable index: tuple t, state th -> t * d + th
    obj = np.einsum("k,tkd->td", r, V[perms]).ravel()
    a_eq = np.tile(np.eye(d), (1, tuples_count))
    a_ge = np.zeros((tuples_count * m, nvars))
    gaps = V[perms[:, :-1]] - V[perms[:, 1:]]  # T x m x d
    for t in range(tuples_count):
        a_ge[t * m:(t + 1) * m, t * d:(t + 1) * d] = gaps[t]
    sol = solve(LinearProgram(obj, a_eq, instance.prior, a_ge, np.zeros(tuples_count * m)))
    if not sol.optimal:
        raise NumericalError(f"fixed-m LP status {sol.status.value}", stage="fixed_m_lp")
    x = np.clip(sol.x.reshape(tuples_count, d), 0.0, None)
    gamma = x.sum(axis=1)
    used = gamma > 0
    posts = x[used] / gamma[used, None]
    scheme = SignalingScheme.from_weights(gamma[used], posts)
    value = scheme_revenue(instance, scheme)
    diag = {
        "lp_value": sol.value,
        "lp_iterations": sol.diagnostics.get("iterations"),
        "variables": nvars,
        "tuples": tuples_count,
        "consistency_residual": consistency_residual(scheme, instance.prior),
        "wall_time_s": time.perf_counter() - start,
    }
    return SolveReport(scheme, value, "fixed-m", diag)


def _hyperplanes(V):
    """Distinct normals ``v_i - v_j`` (zero normals dropped) plus coordinate planes."""
    n, d = V.shape
    i, j = np.triu_indices(n, k=1)
    normals = V[i] - V[j]
    scale = np.abs(normals).max(axis=1)
    normals = normals[scale > 1e-12] / scale[scale > 1e-12, None]
    if normals.size:
        # canonical sign: first nonzero entry positive
        first = normals[np.arange(normals.shape[0]), np.argmax(np.abs(normals) > 1e-12, axis=1)]
        normals = normals * np.sign(first)[:, None]
        normals = np.unique(np.round(normals, 12), axis=0)
    coords = np.eye(d)
    return np.vstack([normals, coords]) if normals.size else coords


def _dedup_points(P, tol=VERTEX_TOL):
    if P.shape[0] == 0:
        return P
    _, first = np.unique(np.round(P / tol), axis=0, return_index=True)
    P = P[np.sort(first)]
    kept = [P[0]]
    for p in P[1:]:
        if np.abs(np.asarray(kept) - p).max(axis=1).min() > tol:
            kept.append(p)
    return np.array(kept)


def enumerate_region_vertices(instance: AuctionInstance, max_subsets=MAX_SUBSETS):
    """All vertices of ordering regions, as rows of a K x d array."""
    d = instance.d
    if d == 1:
        return np.ones((1, 1))
    H = _hyperplanes(instance.padded_valuations())
    total = math.comb(H.shape[0], d - 1)
    if total > max_subsets:
        raise SizeGuardError(f"vertex enumeration needs {total} hyperplane subsets (cap {max_subsets})",
                             required=total, cap=max_subsets)
    found = []
    combos = itertools.combinations(range(H.shape[0]), d - 1)
    chunk = 200_000
    ones = np.ones((1, d))
    while True:
        block = np.array(list(itertools.islice(combos, chunk)), dtype=int)
        if block.size == 0:
            break
        M = np.concatenate([H[block], np.broadcast_to(ones, (block.shape[0], 1, d))], axis=1)
        det = np.linalg.det(M)
        ok = np.abs(det) > 1e-10
        if not ok.any():
            continue
        rhs = np.zeros((int(ok.sum()), d, 1))
        rhs[:, -1, 0] = 1.0
        X = np.linalg.solve(M[ok], rhs)[:, :, 0]
        X = X[np.all(X >= -VERTEX_TOL, axis=1)]
        X = np.clip(X, 0.0, None)
        X /= X.sum(axis=1, keepdims=True)
        found.append(X)
    pts = np.vstack(found) if found else np.zeros((0, d))
    return _dedup_points(pts)


def solve_fixed_d(instance: AuctionInstance, max_subsets=MAX_SUBSETS) -> SolveReport:
    start = time.perf_counter()
    verts = enumerate_region_vertices(instance, max_subsets)
    revs = batch_revenue(instance, verts)
    scheme, lp_value, sol = solve_over_posteriors(instance, verts, revs, stage="fixed_d_lp")
    value = scheme_revenue(instance, scheme)
    diag = {
        "lp_value": lp_value,
        "lp_iterations": sol.diagnostics.get("iterations"),
        "vertices": int(verts.shape[0]),
        "consistency_residual": consistency_residual(scheme, instance.prior),
        "wall_time_s": time.perf_counter() - start,
    }
    return SolveReport(scheme, value, "fixed-d", diag)
