import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pado.model import SimParams, TaskSpec, VehicleState
from pado.oracle import split_grid
from pado.vehicle_policy import (UnitPrices, best_response, best_response_reference, choose_local_frequency,
                                 choose_split, choose_split_prices, decide, freq_grid, p2_objective, p2_value,
                                 unit_prices)

ms = 1e-3


def task(units=10.0, cls=1):
    return TaskSpec(units, 0.005, np.ones(2), cls)


def state(q=0.0, w=0.0, s=4):
    st_ = VehicleState.empty(s)
    st_.queue[0], st_.virtual[0] = q, w
    return st_


def test_unit_price_example():
    p = SimParams(gamma=(0.005, 0.008, 0.012, 0.016))
    prices = unit_prices(state(8 * ms, 5 * ms), task(), 2e9, 1e10, 0.0, p)
    assert prices.psi_loc == pytest.approx(2.35e-19)
    assert prices.psi_off == 0.0
    assert prices.psi_cld == p.drop_price


def test_split_full_offload_when_offload_cheapest():
    assert choose_split(3e-19, 1e-19, 2e-19, 1e8, 1e9, 1e7) == (0.0, 1.0)


def test_split_partial_case():
    # gain = V f^2 / W = 1e19, price gap 6e-20
    a, b = choose_split(1e-19, 1.6e-19, 1e-18, 1e8, 1e9, 1e7)
    assert a == pytest.approx(0.6) and b == pytest.approx(0.4)


def test_split_saturates_local():
    assert choose_split(1e-19, 1e-16, 2e-19, 1e8, 1e9, 1e7) == (1.0, 0.0)


def test_split_via_prices_dataclass():
    assert choose_split_prices(UnitPrices(3e-19, 1e-19, 2e-19), 1e8, 1e9, task()) == (0.0, 1.0)


def test_split_drops_when_cloud_cheapest():
    assert choose_split(3e-19, 4e-19, 1e-19, 1e8, 1e9, 1e7) == (0.0, 0.0)


prices = st.floats(0, 1e-18)


@given(prices, prices, prices, st.floats(1e8, 1e11), st.floats(1e7, 2e9), st.floats(1e6, 3e7))
def test_split_feasible(pl, po, pc, v, f, w):
    a, b = choose_split(pl, po, pc, v, f, w)
    assert 0 <= a <= 1 and 0 <= b <= 1 and a + b <= 1 + 1e-12


@given(st.floats(-0.02, 0.05), st.floats(1e7, 2e7), st.floats(2e6, 2e9), st.floats(0, 3e-19),
       st.floats(1e8, 1e11))
def test_closed_form_split_beats_lattice(slack, w, f, psi_off, v):
    p = SimParams(vehicle_weight=v)
    psi_loc = slack / (v * f) + p.kappa * f
    a, b = choose_split(psi_loc, psi_off, p.drop_price, v, f, w)
    got = p2_value(slack, w, a, b, f, psi_off, v, p.kappa, p.drop_price)
    ga, gb = split_grid(0.01)
    lattice = p2_value(slack, w, ga, gb, f, psi_off, v, p.kappa, p.drop_price).min()
    assert got <= lattice + 1e-9 * max(1.0, abs(lattice))


def test_p2_pure_drop_and_pure_local():
    p = SimParams()
    st_ = state()
    t = task()
    assert p2_objective(st_, t, 0.0, 0.0, 2e9, 0.0, 0.0, p) == pytest.approx(p.vehicle_weight * p.drop_price * 1e7)
    # zero queues and deadline equal to the slot: the slack vanishes
    q = SimParams(gamma=(1 * ms, 4 * ms, 8 * ms, 16 * ms))
    t_loc = 1e7 / 2e9
    expect = 0.5 * t_loc ** 2 + q.vehicle_weight * q.kappa * 2e9 * 1e7
    assert p2_objective(st_, t, 1.0, 0.0, 2e9, 0.0, 0.0, q) == pytest.approx(expect)


def test_frequency_irrelevant_when_nothing_local():
    p = SimParams()
    # positive slack and a free offer: everything leaves at any frequency, f_max by convention
    st_ = state(0.0, 0.01)
    assert decide(st_, task(), p, f_server=1e10, g=0.0)[:2] == (0.0, 1.0)
    assert choose_local_frequency(st_, task(), p, f_server=1e10, g=0.0) == p.f_local_max[0]


def test_heavy_queue_runs_at_full_speed():
    p = SimParams()
    assert choose_local_frequency(state(0.01, 0.5), task(), p) == pytest.approx(p.f_local_max[0])


def test_huge_weight_lowers_frequency():
    p = SimParams(vehicle_weight=1e11, drop_price=1e-16)
    f = choose_local_frequency(state(), task(), p)
    grid = freq_grid(p.f_local_max[0], p.f_local_floor)
    slack = abs(0 - p.slot_len) - p.gamma[0]
    vals = [p2_value(slack, 1e7, *choose_split(slack / (p.vehicle_weight * g) + p.kappa * g, np.inf, p.drop_price,
                                               p.vehicle_weight, g, 1e7), g, np.inf, p.vehicle_weight, p.kappa,
                     p.drop_price) for g in grid]
    assert f < p.f_local_max[0]
    assert f == pytest.approx(grid[int(np.argmin(vals))], rel=0.2)


def test_decide_returns_feasible_triplet():
    a, b, f = decide(state(0.003, 0.001), task(15), SimParams(), f_server=2e10, g=1e-9)
    assert 0 <= a <= 1 and 0 <= b <= 1 - a + 1e-12 and 0 < f <= 2e9


def test_compiled_follower_matches_reference():
    p = SimParams()
    rng = np.random.default_rng(3)
    n = 400
    slack = rng.uniform(-0.02, 0.05, n)
    w = rng.uniform(1e7, 2e7, n)
    psi = np.where(rng.random(n) < 0.3, np.inf, rng.uniform(0, 3e-19, n))
    for term in ("alpha_variant", "as_printed"):
        q = p.replace(energy_term=term)
        f1, a1, b1, v1 = best_response(slack, w, 2e9, psi, q)
        f2, a2, b2, v2 = best_response_reference(slack, w, 2e9, psi, q)
        np.testing.assert_allclose(v1, v2, rtol=1e-9, atol=1e-30)
        np.testing.assert_allclose(a1 + b1, a2 + b2, atol=1e-6)
