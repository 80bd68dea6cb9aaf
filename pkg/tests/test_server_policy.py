import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pado.model import SimParams
from pado import oracle
from pado.oracle import brute_force_server
from pado.server_policy import (battery_upper, case_objectives, charge_amount, dual_loop, dual_loop_reference,
                                dual_value, grid_purchase, make_traces, perturbation_theta, search_cases,
                                server_revenue, solve_offer, update_multipliers)
from pado.validation import fuzz_server_instance
from pado.vehicle_policy import BidSet


def one_bid(psi_loc, workload=1e7, f_local=1e9, demand=(1.0, 1.0), p=None):
    p = p or SimParams()
    return BidSet(np.array([0]), np.array([workload]), np.array([demand], dtype=float), np.array([f_local]),
                  np.array([0.0]), np.array([psi_loc]), np.array([p.drop_price]))


# ---------------------------------------------------------------- battery

def test_theta_examples():
    assert perturbation_theta(200, 0.1, 1.2, 50) == pytest.approx(66.6667, abs=1e-4)
    assert perturbation_theta(0, 0.1, 1.2, 0) == 0.0
    a = perturbation_theta(200, 0.1, 1.2, 50) - 50
    assert perturbation_theta(400, 0.1, 1.2, 50) - 50 == pytest.approx(2 * a)


def test_grid_purchase_examples():
    assert grid_purchase(100, 70, 200, 0.1, 60, 50, 1.2) == pytest.approx(10)
    assert grid_purchase(100, 70, 200, 0.1, 0, 50, 1.2) == 0
    assert grid_purchase(0, 70, 200, 0.1, 0, 50, 1.2) == 0
    assert grid_purchase(10, 500, 1, 0.01, 30, 50, 1.2) == 30


@given(st.floats(0, 300), st.floats(0, 300), st.floats(0, 2e4), st.floats(0.01, 0.2), st.floats(0, 200),
       st.floats(1, 100), st.floats(1, 2))
def test_grid_purchase_feasible(b, theta, h, chi, deficit, cap, eta):
    g = grid_purchase(b, theta, h, chi, deficit, cap, eta)
    assert max(deficit - cap, 0.0) <= g <= deficit


def test_charge_only_when_below_threshold():
    assert charge_amount(10, 70, 200, 0.1, 40, 100, 1.2) == 40
    assert charge_amount(10, 70, 200, 0.1, 400, 100, 1.2) == 100
    assert charge_amount(100, 70, 200, 0.1, 40, 100, 1.2) == 0


def test_upper_bound_formula():
    assert battery_upper(70, 200, 0.1, 1.2, 0.95, 100) == pytest.approx(70 - 20 / 1.2 + 95)


def test_revenue_examples():
    assert server_revenue(np.zeros(0), np.zeros(0), np.zeros(0), np.zeros(0), 0.1, 0.0) == 0.0
    assert server_revenue(np.array([1.0]), np.array([1e7]), np.array([1e10]), np.array([2.0]), 0.1, 0.0) \
        == pytest.approx(0.002)
    r0 = server_revenue(np.array([1.0]), np.array([1e7]), np.array([1e10]), np.array([2.0]), 0.1, 0.0)
    assert server_revenue(np.array([1.0]), np.array([1e7]), np.array([1e10]), np.array([2.0]), 0.1, 3.0) \
        == pytest.approx(r0 - 0.3)


def test_traces_shapes_and_positivity(params):
    tr = make_traces(params, 3000, np.random.default_rng(0))
    assert len(tr) == 3000
    assert np.all(tr.renewable >= 0) and np.all(tr.renewable <= params.renewable_peak)
    assert np.all(tr.price > 0)


# ------------------------------------------------------------ multipliers

def test_multiplier_examples():
    np.testing.assert_allclose(update_multipliers([3.0], 0.1, [10.0], [10.0]), [3.0])
    np.testing.assert_allclose(update_multipliers([5.0], 0.1, [12.0], [10.0]), [5.2])
    np.testing.assert_allclose(update_multipliers([0.1], 0.1, [8.0], [10.0]), [0.0])


@given(st.lists(st.floats(0, 10), min_size=2, max_size=2), st.floats(0, 1),
       st.lists(st.floats(0, 30), min_size=2, max_size=2))
def test_multipliers_stay_nonnegative(nu, step, usage):
    for rule in ("ascent", "printed"):
        assert np.all(update_multipliers(nu, step, usage, [10.0, 10.0], rule) >= 0)


def test_case_objective_signs():
    p = SimParams()
    lam1, _, lam3 = case_objectives(1e7, [1.0, 1.0], 3e-19, 1e9, 1e10, 0.0, -30.0, np.zeros(2), p)
    assert lam1 == pytest.approx(-1e7 * p.kappa * -30.0 * p.discharge_eff * 1e10)
    assert lam1 > 0 and lam3 == 0.0
    vals = [case_objectives(1e7, [1.0, 1.0], 3e-19, 1e9, 1e10, g, 5.0, np.zeros(2), p)[0]
            for g in (0.0, 1e-9, 2e-9)]
    assert vals[0] > vals[1] > vals[2]


# ------------------------------------------------------------------ offers

def test_single_vehicle_gets_reservation_price():
    p = SimParams(capacity=(1e6, 1e6))
    offer = solve_offer(one_bid(5e-19), 20.0, np.zeros(2), p)
    assert offer.accepted[0] and offer.case[0] == 1
    assert offer.psi[0] == pytest.approx((1 - p.price_margin) * p.drop_price, rel=1e-9)
    assert offer.psi[0] < p.drop_price


def test_zero_capacity_rejects():
    p = SimParams(capacity=(10.0, 0.0))
    offer = solve_offer(one_bid(5e-19), 20.0, None, p)
    assert not offer.accepted.any() and offer.case[0] == 3


def test_zero_capacity_rejects_two_vehicles_by_enumeration():
    p = SimParams(capacity=(10.0, 0.0))
    bids = BidSet(np.arange(2), np.array([1e7, 1.5e7]), np.array([[1.0, 1.0], [0.5, 0.7]]), np.array([1e9, 2e9]),
                  np.zeros(2), np.array([5e-19, 2e-19]), np.full(2, p.drop_price))
    offer = solve_offer(bids, 20.0, None, p)
    assert not offer.accepted.any()
    ref = brute_force_server(bids, 20.0, offer.nu, p)
    assert ref.assignment == (False, False)


def test_no_bids_gives_empty_offer(params):
    empty = BidSet(np.zeros(0, int), np.zeros(0), np.zeros((0, 2)), np.zeros(0), np.zeros(0), np.zeros(0),
                   np.zeros(0))
    offer = solve_offer(empty, 0.0, None, params)
    assert len(offer.accepted) == 0 and offer.phi == 0.0


def test_offers_respect_capacity():
    rng = np.random.default_rng(5)
    p = SimParams(capacity=(2.0, 2.0))
    for _ in range(40):
        bids, tilde = fuzz_server_instance(rng, p, 3)
        offer = solve_offer(bids, tilde, None, p)
        assert np.all(offer.usage(bids.demand) <= np.asarray(p.capacity) + 1e-9)
        assert np.all(offer.psi[offer.accepted] <= p.drop_price)


def test_compiled_dual_loop_matches_reference():
    rng = np.random.default_rng(11)
    p = SimParams(capacity=(3.0, 3.0))
    for _ in range(30):
        bids, tilde = fuzz_server_instance(rng, p, 3)
        search = search_cases(bids, tilde, p)
        a = solve_offer(bids, tilde, None, p, search=search)
        b = solve_offer(bids, tilde, None, p, search=search, reference=True)
        assert a.phi == pytest.approx(b.phi, rel=1e-4, abs=1e-30)


def test_dual_loop_is_monotone():
    rng = np.random.default_rng(2)
    p = SimParams(capacity=(1.0, 1.0))
    for _ in range(20):
        bids, tilde = fuzz_server_instance(rng, p, 3)
        offer = solve_offer(bids, tilde, None, p)
        hist = np.asarray(offer.phi_history)
        assert np.all(np.diff(hist) >= -1e-9 * np.abs(hist[:-1]).max(initial=1e-300))


def test_dual_value_accepts_profitable_bids():
    service = np.array([-5.0, 2.0, -1.0])
    demand = np.ones((3, 1))
    val, acc = dual_value(service, demand, np.array([2.0]), np.array([1.0]))
    assert acc.tolist() == [True, False, False]
    assert val == pytest.approx(-5 + 2 - 2)
    assert callable(dual_loop) and callable(dual_loop_reference)


def _realised_phi(offer, bids, tilde, p):
    # value of the chosen offers under the follower's actual response
    total = -float(np.dot(offer.nu, p.capacity))
    for i in np.flatnonzero(offer.accepted):
        v, _ = oracle.served_value(offer.f_server[i], offer.psi[i], i, bids, tilde, p)
        total += float(v) + float(bids.demand[i] @ offer.nu)
    return total


def test_substituted_case_form_matches_direct_minimisation_printed_does_not():
    gaps = {}
    for form in ("substituted", "printed"):
        p = SimParams(lambda2_form=form)
        rng = np.random.default_rng(5)
        worst = []
        for _ in range(40):
            bids, tilde = fuzz_server_instance(rng, p, 1)
            offer = solve_offer(bids, tilde, None, p)
            ref = oracle.brute_force_server(bids, tilde, offer.nu, p)
            worst.append((_realised_phi(offer, bids, tilde, p) - ref.phi) / max(abs(ref.phi), 1e-300))
        gaps[form] = max(worst)
    assert gaps["substituted"] < 1e-9
    assert gaps["printed"] > 1e-2
