"""Sweep figures, rebuilt from the run directories alone (metrics CSVs plus lock files)."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .export import read_lock, read_metrics
from .server_policy import battery_upper, perturbation_theta
from .svgplot import PALETTE, Chart

INDEX = "sweep_index.json"
LOG_PARAMS = {"V", "H"}
SMOOTH = 50


def run_stats(metrics: dict) -> dict:
    ds = sum(v.sum() for k, v in metrics.items() if k.startswith("delay_sum_"))
    dc = sum(v.sum() for k, v in metrics.items() if k.startswith("delay_count_"))
    units = metrics["offloaded_units"].sum()
    return dict(mean_delay=float(ds / dc) if dc else 0.0,
                mean_cost=float(metrics["vehicle_cost"].mean()) if len(metrics["t"]) else 0.0,
                total_revenue=float(metrics["revenue"].sum()),
                unit_price=float(metrics["income"].sum() / units) if units > 0 else 0.0)


def bound_lines(lock: dict, price) -> tuple:
    """Lower and upper confinement lines for a run, from its resolved config and price column."""
    c = lock["config"]
    price = np.asarray(price, dtype=float)
    cap = c["price_cap"] if c["price_cap"] is not None else (float(price.max()) if len(price) else c["price_low"])
    theta = perturbation_theta(c["server_weight"], cap, c["discharge_eff"], c["discharge_cap"])
    upper = battery_upper(theta, c["server_weight"], price, c["discharge_eff"], c["charge_eff"], c["charge_cap"])
    return np.full(len(price), float(c["discharge_cap"])), upper


def _smooth(x, k=SMOOTH):
    if len(x) < k:
        return np.asarray(x, dtype=float)
    return np.convolve(x, np.ones(k) / k, mode="valid")


def sweep_plots(sweep_dir) -> list:
    """Write every figure for the sweep in ``sweep_dir``; returns the written paths."""
    root = Path(sweep_dir)
    index = json.loads((root / INDEX).read_text())
    param, runs = index["param"], index["runs"]
    logx = param in LOG_PARAMS
    policies = list(dict.fromkeys(r["policy"] for r in runs))
    stats = {}
    for r in runs:
        stats[(r["policy"], r["value"])] = run_stats(read_metrics(root / r["dir"] / "metrics.csv"))

    written = []

    def save(chart, name):
        chart.save(root / name)
        written.append(root / name)

    figs = {"delay": ("mean_delay", "mean task delay (s)"), "cost": ("mean_cost", "mean vehicle cost per slot"),
            "price": ("unit_price", "accepted unit price"), "revenue": ("total_revenue", "total server revenue")}
    for name, (key, ylabel) in figs.items():
        ch = Chart(f"{ylabel} vs {param}", param, ylabel, logx=logx)
        for pol in policies:
            vals = sorted(v for p, v in stats if p == pol)
            ch.add(pol, vals, [stats[(pol, v)][key] for v in vals])
        save(ch, f"{name}_vs_{param}.svg")

    ch = Chart("cost-delay tradeoff", "mean task delay (s)", "mean vehicle cost per slot")
    for pol in policies:
        vals = sorted(v for p, v in stats if p == pol)
        ch.add(pol, [stats[(pol, v)]["mean_delay"] for v in vals], [stats[(pol, v)]["mean_cost"] for v in vals],
               style="marker")
    save(ch, "tradeoff.svg")

    # battery traces of the first policy, one line per value, dashed confinement bounds
    first = [r for r in runs if r["policy"] == policies[0]]
    ch = Chart(f"battery level ({policies[0]})", "slot", "battery")
    for k, r in enumerate(first):
        m = read_metrics(root / r["dir"] / "metrics.csv")
        lo, up = bound_lines(read_lock(root / r["dir"]), m["price"])
        color = PALETTE[k % len(PALETTE)]
        ch.add(f"{param}={r['value']:g}", m["t"], m["battery"], color=color)
        ch.add(f"upper {param}={r['value']:g}", m["t"], up, style="dashed", color=color)
        if k == 0:
            ch.add("lower", m["t"], lo, style="dashed", color="#555")
    save(ch, "battery.svg")

    # energy sourcing of the first run: direct renewable, battery, grid (stacked, smoothed)
    m = read_metrics(root / first[0]["dir"] / "metrics.csv")
    if len(m["t"]):
        lock = read_lock(root / first[0]["dir"])
        direct = np.minimum(m["server_energy"], m["renewable"])
        from_battery = m["discharge"] / lock["config"]["discharge_eff"]
        layers = [("renewable", direct), ("battery", from_battery), ("grid", m["grid"])]
        t = m["t"][: len(_smooth(direct))]
        ch = Chart(f"server energy sources ({policies[0]}, {param}={first[0]['value']:g})", "slot", "energy")
        base = np.zeros(len(t))
        for label, layer in layers:
            top = base + _smooth(layer)
            ch.add(label, t, top, style="area", base=base)
            base = top
        save(ch, "energy.svg")
    return written
