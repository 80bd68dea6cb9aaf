import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pado.baselines import (dro_admit, dro_decide, dro_draw, le_decide, tdo_decide, tdo_idle_frequency,
                            update_backlog)
from pado.game import run_horizon
from pado.model import SimParams


def test_le_never_offloads(params):
    rng = np.random.default_rng(0)
    slack = rng.uniform(-0.02, 0.1, 300)
    a, b, f = le_decide(slack, rng.uniform(1e7, 2e7, 300), 2e9, params)
    assert np.all(b == 0) and np.all((a >= 0) & (a <= 1)) and np.all(f <= 2e9)


def test_le_frequency_extremes():
    calm = SimParams(vehicle_weight=1e11, drop_price=1e-16)
    _, _, f = le_decide(-0.001, 1e7, 2e9, calm)
    assert f[0] < 2e9
    _, _, f = le_decide(0.5, 1e7, 2e9, SimParams())
    assert f[0] == pytest.approx(2e9)


def test_dro_without_offloading_is_local():
    p = SimParams(dro_offload_prob=0.0)
    rng = np.random.default_rng(0)
    for _ in range(50):
        assert dro_decide(rng, np.ones(2), np.full(2, 10.0), p) == (1.0, 0.0, False)


def test_dro_zero_capacity_sends_everything_to_cloud():
    beta = np.array([0.3, 0.0, 0.8])
    assert not dro_admit(beta, np.ones((3, 2)), [0.0, 0.0]).any()
    series = run_horizon(SimParams(policy="dro", capacity=(0.0, 0.0), n_vehicles=6, n_slots=40))
    assert series.column("income").sum() == 0.0
    assert series.column("drop_cost").sum() > 0.0


def test_dro_admission_is_first_come():
    ok = dro_admit(np.array([0.5, 0.5, 0.5]), np.array([[2.0], [2.0], [1.0]]), [3.0])
    assert ok.tolist() == [True, False, True]


def test_dro_draw_is_seeded():
    p = SimParams()
    a = [dro_draw(np.random.default_rng(9), p) for _ in range(3)]
    b = [dro_draw(np.random.default_rng(9), p) for _ in range(3)]
    assert a == b


def test_tdo_serves_more_with_bigger_backlog(params):
    backlog = np.linspace(0, 5e5, 40)
    f = tdo_idle_frequency(backlog, 2e9, params)
    assert np.all(np.diff(f) >= 0)
    _, _, f_task = tdo_decide(backlog, 1.5e7, 2e9, np.inf, params)
    assert np.all(np.diff(f_task) >= -1e-6 * f_task[1:])


@given(st.floats(0, 1e6), st.floats(1e6, 2e9))
def test_backlog_drains_without_arrivals(backlog, f):
    nxt = update_backlog(backlog, f, 0.0, 0.0, SimParams())
    assert 0.0 <= nxt <= backlog


def test_tdo_split_is_a_pure_action(params):
    rng = np.random.default_rng(4)
    a, b, _ = tdo_decide(rng.uniform(0, 1e5, 200), 1.2e7, 2e9, rng.uniform(0, 3e-19, 200), params)
    assert np.all(np.isin(a, (0.0, 1.0)) & np.isin(b, (0.0, 1.0))) and np.all(a + b <= 1)
