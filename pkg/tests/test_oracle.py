import numpy as np
import pytest

import pado.game as game
from pado.model import SimParams, SimulationFault
from pado.oracle import (MAX_SERVER_VEHICLES, battery_bound_check, brute_force_p2, brute_force_server,
                         follower_share, split_grid)
from pado.validation import check_battery, check_p2, check_server, fuzz_server_instance, run_suites
from pado.vehicle_policy import BidSet, choose_split


def test_lattice_is_feasible():
    a, b = split_grid(0.01)
    assert len(a) == 101 * 102 // 2
    assert np.all(a + b <= 1 + 1e-12) and np.all((a >= 0) & (b >= 0))


def test_degenerate_task_costs_nothing(params):
    _, _, _, v = brute_force_p2(0.003, 1e-12, 2e9, 1e-19, params)
    assert abs(v) < 1e-15


def test_brute_force_p2_agrees_with_closed_form_split_at_fixed_frequency(params):
    # one-point frequency grid at f_max: the lattice optimum sits within a step of the closed form
    rng = np.random.default_rng(0)
    for _ in range(50):
        slack, w, psi = rng.uniform(-0.02, 0.05), rng.uniform(1e7, 2e7), rng.uniform(0, 3e-19)
        p = params.replace(f_local_floor=0.999999)
        a, b, f, _ = brute_force_p2(slack, w, 2e9, psi, p, n_freq=2)
        psi_loc = slack / (p.vehicle_weight * f) + p.kappa * f
        ca, cb = choose_split(psi_loc, psi, p.drop_price, p.vehicle_weight, f, w)
        assert abs(a - ca) <= 0.01 + 1e-9 and abs(b - cb) <= 0.01 + 1e-9


def test_follower_share_matches_closed_form():
    rng = np.random.default_rng(1)
    for _ in range(200):
        pl, po, pc = rng.uniform(0, 3e-19, 3)
        f, w = rng.uniform(1e8, 2e9), rng.uniform(1e7, 2e7)
        assert follower_share(po, pl, pc, 1e8, f, w) == pytest.approx(choose_split(pl, po, pc, 1e8, f, w)[1])


def test_server_oracle_size_cap(params):
    rng = np.random.default_rng(0)
    bids, tilde = fuzz_server_instance(rng, params, 1)
    big = BidSet(*(np.repeat(getattr(bids, k), MAX_SERVER_VEHICLES + 1, axis=0) for k in
                   ("vehicle", "workload", "demand", "f_local", "slack", "psi_loc", "psi_cld")))
    with pytest.raises(ValueError):
        brute_force_server(big, tilde, np.zeros(2), params)


def test_server_oracle_separates_without_multipliers(params):
    rng = np.random.default_rng(8)
    for _ in range(10):
        bids, tilde = fuzz_server_instance(rng, params, 2)
        joint = brute_force_server(bids, tilde, np.zeros(2), params)
        single = sum(min(brute_force_server(bids.subset([i]), tilde, np.zeros(2), params).phi, 0.0)
                     for i in range(len(bids)))
        assert joint.phi == pytest.approx(single, rel=1e-12, abs=1e-300)


def test_server_oracle_rejects_all_when_battery_starved(params):
    p = params.replace(server_weight=1e-6)
    rng = np.random.default_rng(3)
    bids, _ = fuzz_server_instance(rng, p, 3)
    ref = brute_force_server(bids, -1e6, np.zeros(2), p)
    assert ref.assignment == (False,) * len(bids) and ref.phi == 0.0


def test_battery_check_empty_trace(params):
    assert battery_bound_check([], [], 60.0, params).ok


def test_battery_check_reports_branch(params):
    rep = battery_bound_check([60.0, 40.0, 500.0], [0.1, 0.1, 0.1], 66.67, params)
    assert [v["bound"] for v in rep.violations] == ["lower", "upper"]
    assert rep.first()["t"] == 1 and rep.first()["branch"] == "charge"
    assert rep.violations[1]["branch"] == "discharge"


def test_never_buying_from_grid_breaks_the_battery(params, monkeypatch):
    # a fixed draw of 20 per slot with no grid purchases: 50 -> 26 -> 2 -> overdraw
    monkeypatch.setattr(game, "server_energy", lambda beta, *a: np.full(np.shape(beta), 20.0 / max(np.size(beta), 1)))
    monkeypatch.setattr(game, "grid_purchase", lambda *a, **k: 0.0)
    p = params.replace(n_vehicles=20, arrival_prob=1.0, renewable_peak=1e-9, renewable_noise=0.0)
    world = game.make_world(p, 50)
    levels = []
    with pytest.raises(SimulationFault) as err:
        for _ in range(50):
            levels.append(world.battery)
            game.run_slot(world)
    assert "battery" in err.value.state and len(levels) == 3
    rep = battery_bound_check(levels, world.traces.price[:len(levels)], world.theta, p)
    assert [v["t"] for v in rep.violations] == [1, 2] and rep.first()["bound"] == "lower"


def test_suites_pass_on_defaults(params):
    assert check_p2(150, params, seed=3).passed
    assert check_server(40, params, seed=3).passed
    assert check_battery(params.replace(n_slots=300)).passed


def test_zero_instances_is_vacuous_with_warning(params):
    results = run_suites("all", 0, params)
    assert all(r.passed and r.warning for r in results)
