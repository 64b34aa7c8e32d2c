import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adsignal.core import AuctionInstance, SignalingScheme, revenue, scheme_revenue
from adsignal.errors import SizeGuardError
from adsignal.kv_exact import (OrderingRegion, enumerate_region_vertices, fixed_m_size, merge_same_region,
                               solve_fixed_d, solve_fixed_m)
from adsignal.oracle import grid_opt

from conftest import random_instance


def full_revelation_value(inst):
    return sum(mu * revenue(inst, e) for mu, e in zip(inst.prior, np.eye(inst.d)))


def test_minmax_value(minmax):
    # oracle first: dense grid
    assert grid_opt(minmax, 200) == pytest.approx(0.5, abs=1e-6)
    for solver in (solve_fixed_m, solve_fixed_d):
        rep = solver(minmax)
        assert rep.value == pytest.approx(0.5, abs=1e-6)


def test_minmax_single_atom_achieves_optimum(minmax):
    assert scheme_revenue(minmax, SignalingScheme.single(minmax.prior)) == pytest.approx(0.5)


@pytest.mark.parametrize("p", [0.0, 0.3, 0.5, 0.9])
def test_identical_bidders_linear_revenue(p):
    inst = AuctionInstance(1, [1.0], [p, 1 - p], [[1.0, 0.0], [1.0, 0.0]])
    for solver in (solve_fixed_m, solve_fixed_d):
        assert solver(inst).value == pytest.approx(p, abs=1e-9)


def test_single_state():
    inst = AuctionInstance(2, [0.9, 0.4], [1.0], [[0.7], [0.5], [0.2]])
    expect = revenue(inst, [1.0])
    assert solve_fixed_m(inst).value == pytest.approx(expect)
    assert solve_fixed_d(inst).value == pytest.approx(expect)


def test_full_revelation_instance():
    inst = AuctionInstance(1, [1.0], [0.5, 0.5], [[1, 0], [1, 0], [0, 1]])
    ref = grid_opt(inst, 200)
    for solver in (solve_fixed_m, solve_fixed_d):
        assert solver(inst).value >= ref - 1e-6


def test_vertices_corners_only():
    inst = AuctionInstance(1, [1.0], [0.5, 0.5], [[1.0, 0.5], [0.2, 0.1]])  # no crossing in the simplex
    V = enumerate_region_vertices(inst)
    assert sorted(map(tuple, np.round(V, 12))) == [(0.0, 1.0), (1.0, 0.0)]


def test_vertices_identity_crossing(minmax):
    V = enumerate_region_vertices(minmax)
    assert sorted(map(tuple, np.round(V, 12))) == [(0.0, 1.0), (0.5, 0.5), (1.0, 0.0)]


def test_vertices_equal_rows_are_corners():
    inst = AuctionInstance(1, [1.0], [0.2, 0.3, 0.5], [[0.3, 0.6, 0.9]] * 3)
    V = enumerate_region_vertices(inst)
    assert V.shape == (3, 3)
    assert np.allclose(np.sort(V, axis=0), np.sort(np.eye(3), axis=0))


def test_single_state_vertex():
    inst = AuctionInstance(1, [1.0], [1.0], [[0.5], [0.2]])
    assert np.array_equal(enumerate_region_vertices(inst), [[1.0]])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000))
def test_vertices_lie_in_some_region(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, d_min=2)
    W = inst.padded_valuations()
    for xi in enumerate_region_vertices(inst):
        assert xi.min() >= 0 and xi.sum() == pytest.approx(1.0, abs=1e-12)
        region = OrderingRegion(tuple(np.argsort(-(W @ xi), kind="stable")))
        assert region.contains(W, xi, tol=1e-9)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 100_000))
def test_cross_solver_agreement_and_sandwich(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng)
    a, b = solve_fixed_m(inst), solve_fixed_d(inst)
    assert abs(a.value - b.value) <= 1e-6
    floor = max(revenue(inst, inst.prior), full_revelation_value(inst))
    for rep in (a, b):
        assert rep.value >= floor - 1e-9
        assert rep.diagnostics["consistency_residual"] <= 1e-7
        assert rep.value == pytest.approx(scheme_revenue(inst, rep.scheme), abs=1e-9)


def test_fixed_d_atoms_are_vertices():
    rng = np.random.default_rng(8)
    inst = random_instance(rng, d_min=3)
    verts = enumerate_region_vertices(inst)
    rep = solve_fixed_d(inst)
    for xi in rep.scheme.posteriors:
        assert np.abs(verts - xi).max(axis=1).min() <= 1e-9


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000))
def test_support_lemma_merge(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng)
    rep = solve_fixed_m(inst)
    merged = merge_same_region(inst, rep.scheme)
    assert abs(scheme_revenue(inst, merged) - rep.value) <= 1e-9


def test_fixed_m_size_guard():
    inst = AuctionInstance(5, [1.0] * 5, [0.5, 0.5], np.zeros((40, 2)))
    _, nvars = fixed_m_size(inst)
    assert nvars > 5_000_000
    with pytest.raises(SizeGuardError) as err:
        solve_fixed_m(inst)
    assert err.value.required == nvars


def test_fixed_d_size_guard():
    rng = np.random.default_rng(0)
    inst = AuctionInstance(1, [1.0], rng.dirichlet(np.ones(3)), rng.random((6, 3)))
    with pytest.raises(SizeGuardError):
        enumerate_region_vertices(inst, max_subsets=10)


def test_dummy_padding_single_bidder():
    inst = AuctionInstance(1, [1.0], [0.5, 0.5], [[1.0, 0.3]])
    assert solve_fixed_m(inst).value == pytest.approx(0.0)
    assert solve_fixed_d(inst).value == pytest.approx(0.0)
