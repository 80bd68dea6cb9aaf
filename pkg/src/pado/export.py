"""Run artefacts: the per-slot metrics CSV, the summary and the lock file.

The CSV starts with a ``# pado-metrics <version>`` line, then a header row. Floats
are written with ``repr`` so a fixed (config, seed, package version) gives
byte-identical files.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
from pathlib import Path

import numpy as np

from . import __version__
from .config import dumps
from .game import MetricsSeries
from .model import SimParams

CSV_SCHEMA = 1
CSV_MAGIC = "# pado-metrics"

COLUMN_DOC = {
    "t": "slot index",
    "queue_<s>": "mean delay queue of class s over vehicles after the slot (s)",
    "virtual_<s>": "mean virtual queue of class s over vehicles after the slot (s)",
    "battery": "battery level at the start of the slot",
    "grid": "energy bought from the grid",
    "renewable": "renewable energy harvested",
    "revenue": "server income minus grid cost",
    "vehicle_cost": "mean economic cost per vehicle (energy + payment + cloud)",
    "drop_rate": "mean cloud-dropped share of arriving tasks",
    "acceptance_rate": "share of arriving tasks admitted by the server",
    "mean_unit_price": "server income per offloaded size unit (0 when nothing offloaded)",
    "price": "grid energy price",
    "battery_upper": "upper confinement bound at this slot's price",
    "server_energy": "energy drawn by the server CPU",
    "discharge": "energy taken from the battery",
    "charge": "energy stored into the battery",
    "spill": "renewable energy neither used nor stored",
    "income": "payments received from vehicles",
    "payment": "total payments by vehicles this slot",
    "energy_cost": "total local energy cost",
    "drop_cost": "total cloud cost",
    "n_tasks": "tasks arriving this slot",
    "n_accepted": "tasks admitted by the server",
    "offloaded_units": "size units executed on the server",
    "delay_sum_<s>": "summed completion delay of class-s tasks (s)",
    "delay_count_<s>": "number of class-s tasks",
}

_SCALARS = ("battery", "grid", "renewable", "revenue", "vehicle_cost")
_EXTRAS = ("price", "battery_upper", "server_energy", "discharge", "charge", "spill", "income", "payment",
           "energy_cost", "drop_cost", "n_tasks", "n_accepted", "offloaded_units")
_INTS = {"t", "n_tasks", "n_accepted"}


def columns(n_classes: int) -> list:
    cls = range(1, n_classes + 1)
    return (["t"] + [f"queue_{s}" for s in cls] + [f"virtual_{s}" for s in cls] + list(_SCALARS)
            + ["drop_rate", "acceptance_rate", "mean_unit_price"] + list(_EXTRAS)
            + [f"delay_sum_{s}" for s in cls] + [f"delay_count_{s}" for s in cls])


def _cell(name, v) -> str:
    if name in _INTS or name.startswith("delay_count"):
        return str(int(v))
    return repr(float(v))


def rows(series: MetricsSeries):
    for r in series.records:
        n = r.n_tasks
        row = dict(t=r.t, drop_rate=r.drop_fraction, acceptance_rate=r.n_accepted / n if n else 0.0,
                   mean_unit_price=r.income / r.offloaded_units if r.offloaded_units > 0 else 0.0)
        for s in range(series.params.n_classes):
            row[f"queue_{s + 1}"] = r.queue_mean[s]
            row[f"virtual_{s + 1}"] = r.virtual_mean[s]
            row[f"delay_sum_{s + 1}"] = r.delay_sum[s]
            row[f"delay_count_{s + 1}"] = r.delay_count[s]
        for name in _SCALARS + _EXTRAS:
            row[name] = getattr(r, name)
        yield row


def metrics_csv(series: MetricsSeries) -> str:
    cols = columns(series.params.n_classes)
    buf = io.StringIO()
    buf.write(f"{CSV_MAGIC} {CSV_SCHEMA}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for row in rows(series):
        w.writerow([_cell(c, row[c]) for c in cols])
    return buf.getvalue()


def read_metrics(path) -> dict:
    """Load a metrics CSV into ``{column: np.ndarray}``; rejects unknown schema versions."""
    with open(path, newline="") as fh:
        first = fh.readline().strip()
        if not first.startswith(CSV_MAGIC):
            raise ValueError(f"{path}: not a pado metrics file")
        version = int(first.split()[-1])
        if version != CSV_SCHEMA:
            raise ValueError(f"{path}: schema {version}, expected {CSV_SCHEMA}")
        reader = csv.reader(fh)
        header = next(reader)
        data = [list(map(float, r)) for r in reader]
    arr = np.asarray(data, dtype=float).reshape(len(data), len(header))
    return {c: arr[:, k] for k, c in enumerate(header)}


def params_dict(params: SimParams) -> dict:
    return {f.name: (list(v) if isinstance(v := getattr(params, f.name), tuple) else v)
            for f in dataclasses.fields(params)}


def lock_json(params: SimParams) -> str:
    return json.dumps(dict(package_version=__version__, csv_schema=CSV_SCHEMA, seed=params.seed,
                           config=params_dict(params), config_text=dumps(params)), indent=2, sort_keys=True) + "\n"


def summary_json(series: MetricsSeries) -> str:
    out = series.summary()
    out.update(policy=series.params.policy, seed=series.params.seed, theta=series.theta,
               total_payments=series.total_payments, total_income=float(series.column("income").sum()))
    return json.dumps(out, indent=2, sort_keys=True) + "\n"


def write_run(series: MetricsSeries, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.csv").write_text(metrics_csv(series))
    (out / "summary.json").write_text(summary_json(series))
    (out / "run.lock.json").write_text(lock_json(series.params))
    return out


def read_lock(run_dir) -> dict:
    return json.loads((Path(run_dir) / "run.lock.json").read_text())
