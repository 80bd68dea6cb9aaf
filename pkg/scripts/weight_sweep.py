"""Delay/cost tradeoff over the vehicle weight V for all four policies.

    python3 scripts/weight_sweep.py --out results/weight --slots 1000

Writes one run directory per (policy, V) plus the SVG figures, then prints a table.
"""
import argparse
import json
from pathlib import Path

from pado.cli import main as pado
from pado.plots import run_stats
from pado.export import read_metrics

ap = argparse.ArgumentParser()
ap.add_argument("--out", default="results/weight")
ap.add_argument("--slots", type=int, default=1000)
ap.add_argument("--values", default="1e8,1e9,1e10,1e11")
ap.add_argument("--workers", type=int, default=1)
args = ap.parse_args()

code = pado(["sweep", "--param", "V", "--values", args.values, "--policy", "pado,le,dro,tdo",
             "--slots", str(args.slots), "--workers", str(args.workers), "--out", args.out])
if code:
    raise SystemExit(code)

index = json.loads((Path(args.out) / "sweep_index.json").read_text())
print(f"{'policy':6} {'V':>8} {'delay (s)':>10} {'cost':>11}")
for r in index["runs"]:
    st = run_stats(read_metrics(Path(args.out) / r["dir"] / "metrics.csv"))
    print(f"{r['policy']:6} {r['value']:8.0e} {st['mean_delay']:10.5f} {st['mean_cost']:11.4e}")
