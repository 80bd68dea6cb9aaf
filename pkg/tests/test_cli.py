import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import pado.game as game
from pado import config
from pado.cli import main
from pado.export import CSV_SCHEMA, columns, metrics_csv, read_metrics
from pado.game import run_horizon
from pado.model import SimParams

PRESET = Path(__file__).resolve().parents[1] / "configs" / "default.cfg"


def test_preset_equals_defaults():
    assert config.load(PRESET) == SimParams()


@given(st.floats(1e7, 1e12), st.floats(0.0, 1.0), st.integers(0, 10_000),
       st.sampled_from(["pado", "le", "dro", "tdo"]))
def test_config_round_trip(v, rho, seed, policy):
    p = SimParams(vehicle_weight=v, arrival_prob=rho, seed=seed, policy=policy, dual_step=0.5)
    assert config.loads(config.dumps(p)) == p


def test_missing_gamma_is_named():
    text = "\n".join(l for l in PRESET.read_text().splitlines() if not l.startswith("gamma"))
    with pytest.raises(config.ConfigFileError) as err:
        config.loads(text)
    assert err.value.errors == [("task.gamma", "missing")]


def test_unknown_and_unparseable_keys():
    text = PRESET.read_text().replace("kappa = 1e-28", "kappa = lots\nspeed = 3")
    with pytest.raises(config.ConfigFileError) as err:
        config.loads(text)
    paths = [p for p, _ in err.value.errors]
    assert "vehicle.kappa" in paths and "vehicle.speed" in paths


def test_override():
    p = config.override(SimParams(), ["vehicle.vehicle_weight=3e9"])
    assert p.vehicle_weight == 3e9
    with pytest.raises(config.ConfigFileError):
        config.override(SimParams(), ["arrival_prob=2"])


# ------------------------------------------------------------------ export

def test_csv_layout(small):
    text = metrics_csv(run_horizon(small))
    lines = text.splitlines()
    assert lines[0] == f"# pado-metrics {CSV_SCHEMA}"
    assert lines[1].split(",") == columns(small.n_classes)
    assert lines[1].startswith("t,queue_1,queue_2,queue_3,queue_4,virtual_1")
    assert len(lines) == 2 + small.n_slots


def test_csv_round_trip(tmp_path, small):
    series = run_horizon(small)
    (tmp_path / "m.csv").write_text(metrics_csv(series))
    m = read_metrics(tmp_path / "m.csv")
    np.testing.assert_array_equal(m["battery"], series.column("battery"))
    np.testing.assert_array_equal(m["revenue"], series.column("revenue"))


# --------------------------------------------------------------------- cli

def test_simulate_default_writes_1000_rows(tmp_path):
    assert main(["simulate", "--out", str(tmp_path)]) == 0
    assert len((tmp_path / "metrics.csv").read_text().splitlines()) == 1002
    lock = json.loads((tmp_path / "run.lock.json").read_text())
    assert lock["seed"] == 0 and lock["config"]["gamma"] == [0.002, 0.004, 0.008, 0.016]
    assert json.loads((tmp_path / "summary.json").read_text())["n_slots"] == 1000


def test_simulate_same_seed_same_bytes(tmp_path):
    for d in ("a", "b"):
        assert main(["simulate", str(PRESET), "--seed", "7", "--slots", "120", "--out", str(tmp_path / d)]) == 0
    for name in ("metrics.csv", "summary.json", "run.lock.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_simulate_missing_gamma_exits_2(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("\n".join(l for l in PRESET.read_text().splitlines() if not l.startswith("gamma")))
    assert main(["simulate", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "gamma" in capsys.readouterr().err


def test_simulate_fault_exits_3(tmp_path, monkeypatch):
    monkeypatch.setattr(game, "server_energy", lambda beta, *a: np.full(np.shape(beta), 1e3))
    monkeypatch.setattr(game, "grid_purchase", lambda *a, **k: 0.0)
    assert main(["simulate", "--slots", "20", "--set", "arrival_prob=1", "--out", str(tmp_path)]) == 3
    assert "battery" in json.loads((tmp_path / "fault.json").read_text())["state"]


def test_sweep_runs_and_plots(tmp_path):
    out = tmp_path / "sw"
    args = ["sweep", "--param", "V", "--values", "1e8,1e11", "--policy", "le,pado", "--slots", "40",
            "--set", "n_vehicles=6", "--out", str(out)]
    assert main(args) == 0
    index = json.loads((out / "sweep_index.json").read_text())
    assert len(index["runs"]) == 4
    for name in ("delay_vs_V.svg", "cost_vs_V.svg", "tradeoff.svg", "battery.svg", "energy.svg",
                 "price_vs_V.svg", "revenue_vs_V.svg"):
        assert (out / name).read_text().startswith("<svg")


def test_sweep_battery_plot_has_a_bound_per_value(tmp_path):
    out = tmp_path / "h"
    assert main(["sweep", "--param", "H", "--values", "200,2000,20000", "--slots", "30", "--set", "n_vehicles=4",
                 "--out", str(out)]) == 0
    svg = (out / "battery.svg").read_text()
    lines = [l for l in svg.splitlines() if l.startswith("<polyline")]
    dashed = [l for l in lines if "stroke-dasharray" in l]
    assert len(dashed) == 4  # one upper bound per value plus the shared lower bound
    assert len(lines) - len(dashed) == 3


def test_sweep_single_value_matches_simulate(tmp_path):
    assert main(["sweep", "--param", "rho", "--values", "0.6", "--slots", "30", "--out", str(tmp_path / "s")]) == 0
    assert main(["simulate", "--slots", "30", "--out", str(tmp_path / "r")]) == 0
    assert (tmp_path / "s" / "pado" / "rho_0.6" / "metrics.csv").read_bytes() == \
        (tmp_path / "r" / "metrics.csv").read_bytes()


def test_sweep_with_workers_matches_serial(tmp_path):
    base = ["sweep", "--param", "omega_scale", "--values", "0.5,2", "--slots", "30", "--set", "n_vehicles=6"]
    assert main(base + ["--out", str(tmp_path / "a")]) == 0
    assert main(base + ["--workers", "2", "--out", str(tmp_path / "b")]) == 0
    for d in ("omega_scale_0.5", "omega_scale_2"):
        assert (tmp_path / "a" / "pado" / d / "metrics.csv").read_bytes() == \
            (tmp_path / "b" / "pado" / d / "metrics.csv").read_bytes()


def test_validate_exit_codes(tmp_path, capsys):
    assert main(["validate", "--suite", "battery", "--json", str(tmp_path / "v.json")]) == 0
    assert json.loads((tmp_path / "v.json").read_text())["passed"]
    assert main(["validate", "--n", "0"]) == 0
    assert "warning" in capsys.readouterr().err
    assert main(["validate", "--suite", "p2", "--n", "60", "--set", "energy_term=as_printed"]) == 1
