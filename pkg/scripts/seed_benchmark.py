"""Per-seed comparison of the pricing policy against the three baselines under heavy load."""
import argparse

from pado.game import run_horizon
from pado.model import SimParams

ap = argparse.ArgumentParser()
ap.add_argument("--seeds", type=int, default=10)
ap.add_argument("--rho", type=float, default=0.8)
ap.add_argument("--V", type=float, default=1e9)
ap.add_argument("--slots", type=int, default=1000)
args = ap.parse_args()

policies = ("pado", "le", "dro", "tdo")
print("seed " + " ".join(f"{p + ' delay':>11} {p + ' cost':>11}" for p in policies))
for seed in range(args.seeds):
    row = []
    for pol in policies:
        s = run_horizon(SimParams(policy=pol, arrival_prob=args.rho, vehicle_weight=args.V, seed=seed,
                                  n_slots=args.slots)).summary()
        row += [s["mean_delay"], s["mean_vehicle_cost"]]
    print(f"{seed:4d} " + " ".join(f"{v:11.4e}" for v in row))
