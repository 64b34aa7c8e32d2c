import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adsignal.core import (AuctionInstance, SignalingScheme, consistency_residual, expected_valuations,
                           export_signals, merge_duplicates, posterior, posteriors_from_signals, revenue,
                           revenue_weights, scheme_revenue, solve_over_posteriors, vcg_outcome)
from adsignal.errors import ValidationError

from conftest import random_instance


def brute_revenue(V, lambdas, xi):
    """Sum of VCG payments, written directly from the payment rule."""
    w = list(np.asarray(V) @ xi)
    m = len(lambdas)
    w += [0.0] * max(0, m + 1 - len(w))
    order = sorted(range(len(w)), key=lambda i: (-w[i], i))
    lam = list(lambdas) + [0.0]
    total = 0.0
    for slot in range(m):
        for j in range(slot + 1, m + 1):
            total += w[order[j]] * (lam[j - 1] - lam[j])
    return total


# -- expected_valuations ---------------------------------------------------------------

def test_expected_valuations_identity():
    inst = AuctionInstance(1, [1.0], [0.5, 0.5], np.eye(2))
    assert np.allclose(expected_valuations(inst, [0.3, 0.7]), [0.3, 0.7])


def test_expected_valuations_point_mass_gives_column():
    rng = np.random.default_rng(3)
    V = rng.random((4, 3))
    inst = AuctionInstance(2, [1.0, 0.5], [0.2, 0.3, 0.5], V)
    assert np.allclose(expected_valuations(inst, [0, 1, 0]), V[:, 1])


def test_expected_valuations_constant_rows():
    inst = AuctionInstance(1, [1.0], [0.2, 0.3, 0.5], np.ones((3, 3)))
    assert np.allclose(expected_valuations(inst, [0.1, 0.6, 0.3]), 1.0)


def test_expected_valuations_dimension_mismatch():
    inst = AuctionInstance(1, [1.0], [0.5, 0.5], np.eye(2))
    with pytest.raises(ValidationError):
        expected_valuations(inst, [1.0, 0.0, 0.0])


# -- vcg ---------------------------------------------------------------------------------

def test_vcg_three_bidders():
    order, pay = vcg_outcome([0.8, 0.6, 0.4], [1.0, 0.5])
    assert list(order[:3]) == [0, 1, 2]
    assert pay == pytest.approx([0.5, 0.2])


def test_vcg_zero_bids():
    _, pay = vcg_outcome([0.0, 0.0, 0.0], [1.0, 0.5])
    assert np.all(pay == 0)


def test_vcg_tie_goes_to_lower_index():
    order, pay = vcg_outcome([0.5, 0.5, 0.0], [1.0])
    assert order[0] == 0
    assert pay[0] == pytest.approx(0.5)


def test_vcg_pads_dummies():
    order, pay = vcg_outcome([0.5, 0.5], [1.0, 1.0])
    assert len(order) == 3 and order[2] == 2
    assert pay == pytest.approx([0.0, 0.0])


# -- revenue ----------------------------------------------------------------------------------

def test_revenue_formula_example():
    inst = AuctionInstance(2, [1.0, 0.5], [1.0], [[0.8], [0.6], [0.4]])
    assert revenue(inst, [1.0]) == pytest.approx(0.7)


def test_revenue_single_slot_is_second_price():
    inst = AuctionInstance(1, [1.0], [1.0], [[0.9], [0.35]])
    assert revenue(inst, [1.0]) == pytest.approx(0.35)


def test_revenue_min_of_identity(minmax):
    assert revenue(minmax, [0.5, 0.5]) == pytest.approx(0.5)
    # independent check: second-highest of (xi1, xi2) is the min
    for x in np.linspace(0, 1, 11):
        assert revenue(minmax, [x, 1 - x]) == pytest.approx(min(x, 1 - x))


def test_revenue_weights():
    assert np.allclose(revenue_weights([1.0, 0.5]), [0.0, 0.5, 1.0])


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10_000))
def test_revenue_equals_sum_of_payments(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, n_max=6, m_max=3, d_max=4)
    xi = rng.dirichlet(np.ones(inst.d))
    bids = expected_valuations(inst, xi)
    _, pay = vcg_outcome(bids, inst.lambdas)
    rev = revenue(inst, xi)
    assert rev == pytest.approx(pay.sum(), abs=1e-12)
    assert rev == pytest.approx(brute_revenue(inst.valuations, inst.lambdas, xi), abs=1e-12)
    assert -1e-12 <= rev <= inst.lambdas[0] * inst.m + 1e-12


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000))
def test_revenue_linear_within_ordering_region(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, n_max=5, m_max=2, d_max=3, d_min=2)
    xi = rng.dirichlet(np.ones(inst.d))
    W = inst.padded_valuations()
    order = tuple(np.argsort(-(W @ xi), kind="stable"))
    # a second posterior with the same full ordering: shrink toward xi
    other = rng.dirichlet(np.ones(inst.d))
    for _ in range(60):
        if tuple(np.argsort(-(W @ other), kind="stable")) == order:
            break
        other = 0.5 * (other + xi)
    else:
        return
    t = rng.random()
    mix = t * xi + (1 - t) * other
    expect = t * revenue(inst, xi) + (1 - t) * revenue(inst, other)
    assert revenue(inst, mix) == pytest.approx(expect, abs=1e-9)


# -- schemes -----------------------------------------------------------------------------------

def test_scheme_revenue_no_information(minmax):
    sch = SignalingScheme.single(minmax.prior)
    assert scheme_revenue(minmax, sch) == pytest.approx(revenue(minmax, minmax.prior))


def test_scheme_revenue_full_revelation(minmax):
    sch = SignalingScheme(np.array([0.5, 0.5]), np.eye(2))
    assert scheme_revenue(minmax, sch) == pytest.approx(0.0)


def test_duplicate_atoms_collapse(minmax):
    xi = np.array([0.5, 0.5])
    doubled = SignalingScheme(np.array([0.5, 0.5]), np.vstack([xi, xi]))
    assert scheme_revenue(minmax, doubled) == pytest.approx(scheme_revenue(minmax, SignalingScheme.single(xi)))
    assert len(merge_duplicates(doubled)) == 1


def test_scheme_revenue_rejects_inconsistent(minmax):
    with pytest.raises(ValidationError, match="scheme"):
        scheme_revenue(minmax, SignalingScheme.single([1.0, 0.0]))


def test_consistency_residual_examples():
    mu = np.array([0.5, 0.5])
    assert consistency_residual(SignalingScheme.single(mu), mu) == 0.0
    assert consistency_residual(SignalingScheme(mu, np.eye(2)), mu) == 0.0
    assert consistency_residual(SignalingScheme.single([1.0, 0.0]), mu) == pytest.approx(0.5)


def test_scheme_validation():
    with pytest.raises(ValidationError):
        SignalingScheme(np.array([0.5, 0.6]), np.eye(2))
    with pytest.raises(ValidationError):
        SignalingScheme(np.array([1.0]), np.array([[0.6, 0.6]]))
    with pytest.raises(ValidationError):
        posterior([0.5, -0.1, 0.6])


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000))
def test_merging_duplicates_preserves_revenue(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, d_min=2)
    P = rng.dirichlet(np.ones(inst.d), size=3)
    P = np.vstack([P, P[:2]])
    w = rng.dirichlet(np.ones(5))
    sch = SignalingScheme(w, P)
    inst = inst.with_prior(w @ P / (w @ P).sum())
    assert scheme_revenue(inst, merge_duplicates(sch)) == pytest.approx(scheme_revenue(inst, sch), abs=1e-12)


# -- signals -------------------------------------------------------------------------------------

def test_export_single_atom():
    mu = np.array([0.2, 0.3, 0.5])
    phi, flag = export_signals(SignalingScheme.single(mu), mu)
    assert np.allclose(phi, 1.0) and not flag.any()


def test_export_full_revelation():
    mu = np.array([0.5, 0.5])
    phi, _ = export_signals(SignalingScheme(mu, np.eye(2)), mu)
    assert np.allclose(phi, np.eye(2))


def test_export_flags_unreachable_state():
    mu = np.array([1.0, 0.0])
    phi, flag = export_signals(SignalingScheme.single(mu), mu)
    assert list(flag) == [False, True]
    assert np.allclose(phi[1], 1.0)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000))
def test_export_round_trip(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 5))
    P = rng.dirichlet(np.ones(d), size=3)
    w = rng.dirichlet(np.ones(3))
    mu = w @ P
    sch = SignalingScheme(w, P)
    phi, _ = export_signals(sch, mu)
    assert np.allclose(phi.sum(axis=1), 1.0)
    probs, post = posteriors_from_signals(phi, mu)
    assert np.abs(post - P).max() <= 1e-9
    assert np.abs(probs - w).max() <= 1e-9


# -- instance validation / LP helper --------------------------------------------------------------

@pytest.mark.parametrize("kwargs, field", [
    (dict(prior=[0.5, 0.4]), "prior"),
    (dict(prior=[1.2, -0.2]), "prior"),
    (dict(lambdas=[0.5]), None),
    (dict(valuations=[[1.5, 0], [0, 1]]), "valuations"),
    (dict(m=3, lambdas=[1.0, 1.0, 1.0]), "m"),
])
def test_instance_validation(kwargs, field):
    base = dict(m=1, lambdas=[1.0], prior=[0.5, 0.5], valuations=[[1.0, 0.0], [0.0, 1.0]])
    base.update(kwargs)
    if field is None:
        AuctionInstance(**base)
        return
    with pytest.raises(ValidationError) as err:
        AuctionInstance(**base)
    assert err.value.field == field


def test_lambdas_must_be_non_increasing():
    with pytest.raises(ValidationError, match="lambdas"):
        AuctionInstance(2, [0.5, 1.0], [1.0], [[1.0], [0.5]])


def test_lp3_single_posterior(minmax):
    sch, value, _ = solve_over_posteriors(minmax, [minmax.prior])
    assert value == pytest.approx(revenue(minmax, minmax.prior))
    assert len(sch) == 1
