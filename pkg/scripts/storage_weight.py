"""Battery trajectories for several storage weights H, checked against the confinement bounds.

    python3 scripts/storage_weight.py --slots 10000 --out results/storage
"""
import argparse

from pado.cli import main as pado
from pado.export import read_metrics

ap = argparse.ArgumentParser()
ap.add_argument("--out", default="results/storage")
ap.add_argument("--slots", type=int, default=10_000)
ap.add_argument("--values", default="200,2000,20000")
args = ap.parse_args()

if pado(["sweep", "--param", "H", "--values", args.values, "--slots", str(args.slots), "--out", args.out]):
    raise SystemExit(1)
for h in args.values.split(","):
    m = read_metrics(f"{args.out}/pado/H_{float(h):g}/metrics.csv")
    b = m["battery"]
    tail = b[3 * len(b) // 4:].mean()
    print(f"H={float(h):<8g} min {b.min():8.2f}  max {b.max():8.2f}  final-quarter mean {tail:8.2f}  "
          f"max over upper bound {max(0.0, (b - m['battery_upper']).max()):.3g}")
