"""Scan the cloud drop price and report how the V-tradeoff of each policy responds.

Used to pick the default drop price: the cloud must be expensive enough that offloading
matters, but not so expensive that every policy saturates at local execution.
"""
import argparse

import numpy as np

from pado.game import run_horizon
from pado.model import SimParams

ap = argparse.ArgumentParser()
ap.add_argument("--prices", default="1.5e-20,1.5e-19,1.5e-18")
ap.add_argument("--slots", type=int, default=500)
args = ap.parse_args()

weights = (1e8, 1e9, 1e10, 1e11)
for price in map(float, args.prices.split(",")):
    print(f"drop price {price:g}")
    for pol in ("pado", "le", "tdo"):
        rows = [run_horizon(SimParams(policy=pol, drop_price=price, vehicle_weight=v, n_slots=args.slots)).summary()
                for v in weights]
        cost = np.array([r["mean_vehicle_cost"] for r in rows])
        delay = np.array([r["mean_delay"] for r in rows])
        print(f"  {pol:5} cost {np.array2string(cost, precision=3)}  delay {np.array2string(delay, precision=4)}")
