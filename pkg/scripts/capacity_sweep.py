"""Server price and revenue as the resource capacity is scaled.

    python3 scripts/capacity_sweep.py --out results/capacity
"""
import argparse
import json
from pathlib import Path

from pado.cli import main as pado
from pado.export import read_metrics
from pado.plots import run_stats

ap = argparse.ArgumentParser()
ap.add_argument("--out", default="results/capacity")
ap.add_argument("--slots", type=int, default=1000)
ap.add_argument("--values", default="0.5,1,2,4")
args = ap.parse_args()

code = pado(["sweep", "--param", "omega_scale", "--values", args.values, "--slots", str(args.slots),
             "--out", args.out])
if code:
    raise SystemExit(code)
index = json.loads((Path(args.out) / "sweep_index.json").read_text())
for r in index["runs"]:
    st = run_stats(read_metrics(Path(args.out) / r["dir"] / "metrics.csv"))
    print(f"scale {r['value']:4g}  unit price {st['unit_price']:.5e}  revenue {st['total_revenue']:.4e}")
