"""Domain types and per-slot physics of the pre-allocation offloading system.

Units: time in seconds, workload in CPU cycles, energy in joules, money in
abstract currency. A task of ``size_units`` carries ``size_units * bits_per_unit``
bits and ``bits * cycles_per_bit`` cycles of work; every execution-time formula
divides cycles by a frequency in cycles/s.

All numeric helpers accept scalars or numpy arrays and broadcast.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

ENERGY_TERMS = ("as_printed", "alpha_variant")
DUAL_UPDATES = ("ascent", "printed")
LAMBDA2_FORMS = ("substituted", "printed")
POLICIES = ("pado", "le", "dro", "tdo")
PRICE_TRACES = ("flat", "two_level", "file")
RENEWABLE_TRACES = ("diurnal", "file")


class SimulationFault(RuntimeError):
    """A physical constraint was violated; indicates a policy bug."""

    def __init__(self, message: str, state: Optional[dict] = None):
        super().__init__(message)
        self.state = state or {}


@dataclass
class SimParams:
    # workload
    n_vehicles: int = 50
    arrival_prob: float = 0.6
    size_min_units: float = 10.0
    size_max_units: float = 20.0
    bits_per_unit: float = 1000.0
    cycles_per_bit: float = 1000.0
    slot_len: float = 1e-3
    gamma: tuple = (0.002, 0.004, 0.008, 0.016)  # delay-class deadlines (s)
    deadline_span: float = 2.0  # deadlines drawn log-uniform on [gamma[0], gamma[-1]*span]
    n_resources: int = 2
    demand_min: float = 0.5
    demand_max: float = 1.5
    # vehicles
    f_local_max: tuple = (2e9, 2e9, 2e9, 2e9)  # per class (cycles/s)
    f_local_floor: float = 1e-3  # lowest searched frequency as a fraction of f_local_max
    kappa: float = 1e-28
    vehicle_weight: float = 1e8
    drop_price: float = 1.5e-19  # per cycle, below the local energy price at full speed
    energy_term: str = "alpha_variant"
    # server
    server_deadline: float = 2e-3
    f_server_max: float = 5e10
    server_weight: float = 200.0
    capacity: tuple = (10.0, 10.0)
    price_ceiling: Optional[float] = None  # None -> 10 * drop_price * f_server_max
    price_margin: float = 1e-6
    # energy
    charge_eff: float = 0.95
    discharge_eff: float = 1.2
    discharge_cap: float = 50.0
    charge_cap: float = 100.0
    renewable_peak: float = 100.0
    renewable_trace: str = "diurnal"
    renewable_period: int = 2000
    renewable_noise: float = 0.2
    renewable_file: Optional[str] = None
    price_trace: str = "flat"
    price_low: float = 0.05
    price_high: float = 0.1
    price_period: int = 500
    price_file: Optional[str] = None
    price_cap: Optional[float] = 0.1  # price used to size the perturbation; None -> trace max
    battery_init: Optional[float] = None  # None -> discharge_cap
    # leader solver
    grid_points: int = 32
    refine_iters: int = 24
    dual_step: Optional[float] = None  # None -> scaled from the bids
    dual_tol: float = 1e-6  # relative to the bids' value scale
    dual_max_iter: int = 100
    dual_init: Optional[float] = None  # None -> smallest multiplier rejecting every bid
    dual_update: str = "ascent"
    lambda2_form: str = "substituted"
    lambda2_t: float = 1.0
    inner_rounds: int = 1
    # baselines
    policy: str = "pado"
    dro_offload_prob: float = 0.5
    # run
    n_slots: int = 1000
    seed: int = 0

    # ----------------------------------------------------------------- derived
    @property
    def n_classes(self) -> int:
        return len(self.gamma)

    @property
    def g_max(self) -> float:
        if self.price_ceiling is not None:
            return float(self.price_ceiling)
        return 10.0 * self.drop_price * self.f_server_max

    @property
    def b0(self) -> float:
        return self.discharge_cap if self.battery_init is None else float(self.battery_init)

    def replace(self, **changes) -> "SimParams":
        return dataclasses.replace(self, **changes)

    def validate(self) -> list:
        """Return ``[(field_path, message), ...]``; empty when valid."""
        errs = []

        def need(cond, name, msg):
            if not cond:
                errs.append((name, msg))

        need(isinstance(self.n_vehicles, int) and self.n_vehicles >= 0, "n_vehicles", "must be a non-negative integer")
        need(0.0 <= self.arrival_prob <= 1.0, "arrival_prob", "must lie in [0, 1]")
        need(0 < self.size_min_units <= self.size_max_units, "size_min_units", "need 0 < size_min_units <= size_max_units")
        for name in ("bits_per_unit", "cycles_per_bit", "slot_len", "kappa", "vehicle_weight", "drop_price",
                     "server_deadline", "f_server_max", "server_weight", "discharge_cap", "charge_cap",
                     "renewable_peak", "deadline_span"):
            need(getattr(self, name) > 0, name, "must be strictly positive")
        if len(self.gamma) == 0:
            errs.append(("gamma", "missing: at least one delay-class deadline required"))
        else:
            g = np.asarray(self.gamma, dtype=float)
            need(bool(np.all(g > 0)), "gamma", "deadlines must be strictly positive")
            need(bool(np.all(np.diff(g) >= 0)), "gamma", "deadlines must be non-decreasing")
        need(len(self.f_local_max) == len(self.gamma), "f_local_max", "needs one entry per delay class")
        for k, f in enumerate(self.f_local_max):
            need(f > 0, f"f_local_max[{k}]", "must be strictly positive")
        need(0 < self.f_local_floor < 1, "f_local_floor", "must lie in (0, 1)")
        need(0 < self.charge_eff <= 1, "charge_eff", "must lie in (0, 1]")
        need(self.discharge_eff >= 1, "discharge_eff", "must be >= 1")
        need(self.n_resources == len(self.capacity), "capacity", "needs one entry per resource type")
        for k, c in enumerate(self.capacity):
            need(c >= 0, f"capacity[{k}]", "must be non-negative")
        need(0 <= self.demand_min <= self.demand_max, "demand_min", "need 0 <= demand_min <= demand_max")
        need(self.energy_term in ENERGY_TERMS, "energy_term", f"must be one of {ENERGY_TERMS}")
        need(self.dual_update in DUAL_UPDATES, "dual_update", f"must be one of {DUAL_UPDATES}")
        need(self.lambda2_form in LAMBDA2_FORMS, "lambda2_form", f"must be one of {LAMBDA2_FORMS}")
        need(self.policy in POLICIES, "policy", f"must be one of {POLICIES}")
        need(self.price_trace in PRICE_TRACES, "price_trace", f"must be one of {PRICE_TRACES}")
        need(self.renewable_trace in RENEWABLE_TRACES, "renewable_trace", f"must be one of {RENEWABLE_TRACES}")
        need(self.price_trace != "file" or bool(self.price_file), "price_file", "required when price_trace = file")
        need(self.renewable_trace != "file" or bool(self.renewable_file), "renewable_file",
             "required when renewable_trace = file")
        need(0 < self.price_low <= self.price_high, "price_low", "need 0 < price_low <= price_high")
        need(self.price_cap is None or self.price_cap > 0, "price_cap", "must be positive")
        need(self.renewable_period > 0 and self.price_period > 0, "renewable_period", "periods must be positive")
        need(self.grid_points >= 2, "grid_points", "must be >= 2")
        need(self.dual_max_iter >= 1, "dual_max_iter", "must be >= 1")
        need(self.dual_tol > 0, "dual_tol", "must be positive")
        need(self.dual_step is None or self.dual_step > 0, "dual_step", "must be positive")
        need(self.dual_init is None or self.dual_init >= 0, "dual_init", "must be non-negative")
        need(self.g_max > 0, "price_ceiling", "must be positive")
        need(0 <= self.price_margin < 1, "price_margin", "must lie in [0, 1)")
        need(self.inner_rounds >= 1, "inner_rounds", "must be >= 1")
        need(0 <= self.dro_offload_prob <= 1, "dro_offload_prob", "must lie in [0, 1]")
        need(isinstance(self.n_slots, int) and self.n_slots >= 0, "n_slots", "must be a non-negative integer")
        need(self.b0 >= 0, "battery_init", "must be non-negative")
        return errs


@dataclass
class TaskSpec:
    size_units: float
    deadline: float
    demand: np.ndarray
    delay_class: int  # 1-based
    bits_per_unit: float = 1000.0
    cycles_per_bit: float = 1000.0

    @property
    def size_bits(self) -> float:
        return self.size_units * self.bits_per_unit

    @property
    def workload(self) -> float:
        return self.size_bits * self.cycles_per_bit


@dataclass
class VehicleState:
    queue: np.ndarray  # delay queue per class (s)
    virtual: np.ndarray  # virtual queue per class (s)
    cumulative_cost: float = 0.0

    @classmethod
    def empty(cls, n_classes: int) -> "VehicleState":
        return cls(np.zeros(n_classes), np.zeros(n_classes))


@dataclass
class ServerState:
    battery: float
    theta: float
    multipliers: np.ndarray
    cumulative_revenue: float = 0.0

    @property
    def battery_tilde(self) -> float:
        return self.battery - self.theta


@dataclass
class SlotDecision:
    alpha: np.ndarray
    beta: np.ndarray
    f_local: np.ndarray
    f_server: np.ndarray
    price: np.ndarray  # g, currency per second of rented CPU
    grid: float = 0.0
    charge: float = 0.0


@dataclass
class MetricsRecord:
    t: int
    queue_mean: np.ndarray
    virtual_mean: np.ndarray
    delay_sum: np.ndarray  # per class, summed over served tasks
    delay_count: np.ndarray
    battery: float
    battery_next: float
    battery_upper: float
    grid: float
    renewable: float
    price: float
    server_energy: float
    discharge: float
    charge: float
    spill: float
    revenue: float
    income: float
    vehicle_cost: float
    energy_cost: float
    payment: float
    drop_cost: float
    n_tasks: int
    drop_fraction: float
    n_accepted: int
    offloaded_units: float


# --------------------------------------------------------------------- tasks


def delay_class(tau, gamma: Sequence[float]):
    """Largest 1-based index j with ``gamma[j-1] <= tau``; 1 when none qualifies."""
    g = np.asarray(gamma, dtype=float)
    idx = np.searchsorted(g, np.asarray(tau, dtype=float), side="right")
    out = np.maximum(idx, 1)
    return int(out) if np.ndim(out) == 0 else out


def draw_deadline(rng: np.random.Generator, params: SimParams) -> float:
    lo = math.log(params.gamma[0])
    hi = math.log(params.gamma[-1] * params.deadline_span)
    return float(math.exp(rng.uniform(lo, hi)))


def generate_task(rng: np.random.Generator, params: SimParams) -> Optional[TaskSpec]:
    """Bernoulli arrival with uniform size, log-uniform deadline and uniform demand vector.

    Always consumes the same number of draws so streams stay aligned whether or
    not a task arrives.
    """
    u = rng.random()
    size = rng.uniform(params.size_min_units, params.size_max_units)
    tau = draw_deadline(rng, params)
    demand = rng.uniform(params.demand_min, params.demand_max, size=params.n_resources)
    if u >= params.arrival_prob:
        return None
    return TaskSpec(float(size), tau, demand, delay_class(tau, params.gamma),
                    params.bits_per_unit, params.cycles_per_bit)


# -------------------------------------------------------------------- queues


def ratio(num, den, fill=0.0):
    """``num / den`` where ``den != 0``, ``fill`` elsewhere (no floating-point warnings)."""
    den = np.asarray(den, dtype=float)
    nonzero = den != 0
    return np.where(nonzero, np.asarray(num, dtype=float) / np.where(nonzero, den, 1.0), fill)


def as_vector(x, n: int) -> np.ndarray:
    """Contiguous float vector of length ``n`` (scalars are broadcast)."""
    a = np.asarray(x, dtype=float)
    if a.shape != (n,):
        a = np.broadcast_to(a, (n,))
    return np.ascontiguousarray(a)


def _safe_ratio(num, den):
    # zero work costs zero time even at zero frequency
    return ratio(num, den)


def _check_rates(fraction, freq, what):
    bad = (np.asarray(fraction) > 0) & (np.asarray(freq) <= 0)
    if np.any(bad):
        raise ValueError(f"{what}: positive fraction needs a positive frequency")


def update_delay_queue(queue, slot_len, alpha, workload, f_local, in_class=True):
    """Drain by one slot, then add the newly pre-allocated local execution time."""
    _check_rates(np.asarray(alpha) * np.asarray(in_class), f_local, "update_delay_queue")
    drained = np.maximum(np.asarray(queue, dtype=float) - slot_len, 0.0)
    added = _safe_ratio(np.asarray(alpha) * np.asarray(in_class, dtype=float) * np.asarray(workload), f_local)
    out = np.maximum(drained + added, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def update_virtual_queue(virtual, queue_next, deadline):
    out = np.maximum(np.asarray(virtual, dtype=float) + queue_next - deadline, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def exec_times(workload, alpha, beta, f_local, f_server, queue_prev):
    """Local, server and total delay of one task.

    With nothing local the total is the served share's server time; otherwise the
    local part waits behind the class queue and runs in parallel with the server part.
    """
    _check_rates(alpha, f_local, "exec_times")
    _check_rates(beta, f_server, "exec_times")
    d_local = _safe_ratio(np.asarray(alpha) * workload, f_local)
    d_server = _safe_ratio(np.asarray(beta) * workload, f_server)
    d_total = np.where(np.asarray(alpha) == 0, d_server, np.maximum(queue_prev + d_local, d_server))
    if np.ndim(d_total) == 0:
        return float(d_local), float(d_server), float(d_total)
    return d_local, d_server, d_total


def local_energy(alpha, workload, f_local, kappa):
    # kappa f^2 * (alpha W / f)
    out = kappa * np.asarray(alpha) * np.asarray(f_local) * np.asarray(workload)
    return float(out) if np.ndim(out) == 0 else out


def server_energy(beta, workload, f_server, kappa):
    out = kappa * np.asarray(beta) * np.asarray(f_server) * np.asarray(workload)
    return float(out) if np.ndim(out) == 0 else out


# ------------------------------------------------------------------- battery


def battery_flows(battery, renewable, demand, grid, charge, charge_eff, discharge_eff):
    """Energy bookkeeping for one slot.

    Returns ``(next_battery, extracted, delivered, spill)`` where ``delivered`` is the
    battery energy reaching the load and ``extracted = discharge_eff * delivered`` is
    what leaves the battery.
    """
    deficit = max(demand - renewable, 0.0)
    surplus = max(renewable - demand, 0.0)
    delivered = deficit - grid
    extracted = discharge_eff * delivered
    spill = surplus - charge
    nxt = battery - extracted + charge_eff * charge
    return nxt, extracted, delivered, spill


def update_battery(battery, renewable, demand, grid, charge, charge_eff, discharge_eff, charge_cap=math.inf):
    """Next battery level; raises :class:`SimulationFault` on infeasible flows."""
    tol = 1e-9 * max(1.0, abs(battery), abs(demand), abs(renewable))
    deficit = max(demand - renewable, 0.0)
    surplus = max(renewable - demand, 0.0)
    state = dict(battery=battery, renewable=renewable, demand=demand, grid=grid, charge=charge)
    if grid < -tol or grid > deficit + tol:
        raise SimulationFault(f"grid purchase {grid!r} outside [0, deficit={deficit!r}]", state)
    if charge < -tol or charge > min(charge_cap, surplus) + tol:
        raise SimulationFault(f"charge {charge!r} outside [0, min(cap, surplus={surplus!r})]", state)
    nxt, extracted, _, _ = battery_flows(battery, renewable, demand, grid, charge, charge_eff, discharge_eff)
    if extracted < -tol or extracted > battery + tol:
        raise SimulationFault(f"battery extraction {extracted!r} outside [0, B={battery!r}]", state)
    return nxt
