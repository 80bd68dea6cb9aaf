"""Slot-by-slot leader/follower orchestration and the horizon loop."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import baselines
from .model import (MetricsRecord, SimParams, SimulationFault, SlotDecision, delay_class, exec_times,
                    local_energy, ratio, server_energy, update_battery, update_delay_queue, update_virtual_queue)
from .server_policy import (EnergyTraces, ServerOffer, battery_upper, charge_amount, grid_purchase, make_traces,
                            perturbation_theta, solve_offer, theta_price)
from .vehicle_policy import BidSet, best_response, local_price, queue_slack

BLOCK = 256  # slots of random draws fetched per vehicle at a time


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{k}: {m}" for k, m in self.errors))


class _StreamBank:
    """One generator per agent, read in fixed-size blocks so draws never depend on the horizon."""

    def __init__(self, seeds, width: int):
        self.rngs = [np.random.default_rng(s) for s in seeds]
        self.width = width
        self.block = np.zeros((len(self.rngs), 0, width))
        self.start = 0

    def rows(self, t: int) -> np.ndarray:
        """Row ``t`` of every agent's stream, shape (agents, width)."""
        while t >= self.start + self.block.shape[1]:
            self.start += self.block.shape[1]
            self.block = np.stack([r.random((BLOCK, self.width)) for r in self.rngs]) if self.rngs \
                else np.zeros((0, BLOCK, self.width))
        return self.block[:, t - self.start]


@dataclass
class World:
    params: SimParams
    traces: EnergyTraces
    t: int
    queue: np.ndarray  # (M, S)
    virtual: np.ndarray  # (M, S)
    cost: np.ndarray  # cumulative per vehicle
    payments: np.ndarray  # cumulative per vehicle
    battery: float
    theta: float
    nu: Optional[np.ndarray]
    revenue: float
    income: float
    offer_f: np.ndarray  # last offer per vehicle (0 when none)
    offer_g: np.ndarray
    backlog: np.ndarray  # bits, backlog rule only
    backlog_f: np.ndarray
    task_streams: _StreamBank
    policy_streams: _StreamBank

    def snapshot(self) -> dict:
        return dict(t=self.t, battery=self.battery, theta=self.theta,
                    nu=None if self.nu is None else self.nu.tolist(),
                    queue_mean=self.queue.mean(axis=0).tolist() if self.queue.size else [],
                    virtual_mean=self.virtual.mean(axis=0).tolist() if self.virtual.size else [],
                    revenue=self.revenue)


def make_world(params: SimParams, n_slots: Optional[int] = None) -> World:
    errs = params.validate()
    if errs:
        raise ConfigError(errs)
    n_slots = params.n_slots if n_slots is None else n_slots
    M, S = params.n_vehicles, params.n_classes
    root = np.random.SeedSequence(params.seed)
    trace_seq, server_seq, vehicle_seq = root.spawn(3)
    task_seqs = vehicle_seq.spawn(2 * M)
    traces = make_traces(params, n_slots, np.random.default_rng(trace_seq))
    theta = perturbation_theta(params.server_weight, theta_price(params, traces), params.discharge_eff,
                               params.discharge_cap)
    fmax = max(params.f_local_max) if params.f_local_max else 0.0
    return World(params=params, traces=traces, t=0,
                 queue=np.zeros((M, S)), virtual=np.zeros((M, S)), cost=np.zeros(M), payments=np.zeros(M),
                 battery=params.b0, theta=theta, nu=None, revenue=0.0, income=0.0,
                 offer_f=np.full(M, params.f_server_max), offer_g=np.zeros(M),
                 backlog=np.zeros(M), backlog_f=np.full(M, fmax),
                 task_streams=_StreamBank(task_seqs[:M], 3 + params.n_resources),
                 policy_streams=_StreamBank(task_seqs[M:], 2))


@dataclass
class _Arrivals:
    vehicle: np.ndarray
    cls: np.ndarray  # 0-based
    size_units: np.ndarray
    demand: np.ndarray

    def __len__(self):
        return len(self.vehicle)


def draw_arrivals(world: World) -> _Arrivals:
    """Bernoulli arrivals, uniform sizes, log-uniform deadlines and uniform demand vectors."""
    p = world.params
    K = p.n_resources
    rows = world.task_streams.rows(world.t)
    hit = rows[:, 0] < p.arrival_prob
    rows = rows[hit]
    size = p.size_min_units + (p.size_max_units - p.size_min_units) * rows[:, 1]
    lo, hi = math.log(p.gamma[0]), math.log(p.gamma[-1] * p.deadline_span)
    tau = np.exp(lo + (hi - lo) * rows[:, 2])
    demand = p.demand_min + (p.demand_max - p.demand_min) * rows[:, 3:]
    cls = np.atleast_1d(delay_class(tau, p.gamma)) - 1
    return _Arrivals(np.flatnonzero(hit), cls.astype(int), size, demand.reshape(-1, K))


def _follower(policy, slack, backlog, workload, fmax, psi_off, p: SimParams):
    if policy == "tdo":
        return baselines.tdo_decide(backlog, workload, fmax, psi_off, p)
    f, a, b, _ = best_response(slack, workload, fmax, psi_off, p)
    return a, b, f


def _bid_prices(policy, slack, backlog, f_local, fmax, p: SimParams):
    if policy == "tdo":
        return baselines.tdo_local_price(backlog, f_local, fmax, p)
    return local_price(slack, f_local, p.vehicle_weight, p.kappa)


def _stackelberg(world: World, arr: _Arrivals, slack, workload, fmax):
    """One leader/follower exchange (or ``inner_rounds`` of them)."""
    p = world.params
    n = len(arr)
    backlog = world.backlog[arr.vehicle]
    psi_prev = ratio(world.offer_g[arr.vehicle], world.offer_f[arr.vehicle], np.inf)
    a, b, f = _follower(p.policy, slack, backlog, workload, fmax, psi_prev, p)
    offer = None
    for _ in range(max(p.inner_rounds, 1)):
        bids = BidSet(arr.vehicle, workload, arr.demand, f, slack,
                      _bid_prices(p.policy, slack, backlog, f, fmax, p), np.full(n, p.drop_price))
        offer = solve_offer(bids, world.battery - world.theta, world.nu, p)
        a, b, f = _follower(p.policy, slack, backlog, workload, fmax, offer.psi, p)
    world.nu = offer.nu
    world.offer_f[arr.vehicle] = offer.f_server
    world.offer_g[arr.vehicle] = offer.g
    served = offer.accepted & (b > 0)
    return a, np.where(served, b, 0.0), f, np.where(served, offer.f_server, 0.0), np.where(served, offer.g, 0.0), offer


def run_slot(world: World):
    """Advance the world by one slot; returns ``(SlotDecision, MetricsRecord)``."""
    p = world.params
    t = world.t
    S = p.n_classes
    arr = draw_arrivals(world)
    n = len(arr)
    v, c = arr.vehicle, arr.cls
    workload = arr.size_units * p.bits_per_unit * p.cycles_per_bit
    fmax = np.asarray(p.f_local_max, dtype=float)[c] if n else np.zeros(0)
    gamma = np.asarray(p.gamma, dtype=float)
    q_prev = world.queue[v, c]
    slack = queue_slack(q_prev, world.virtual[v, c], p.slot_len, gamma[c])

    cloud = np.zeros(n)  # offloaded share that goes to the cloud at the drop price
    n_accepted = 0
    if n == 0:
        alpha = beta = f_loc = f_srv = g = np.zeros(0)
    elif p.policy in ("pado", "tdo"):
        alpha, beta, f_loc, f_srv, g, offer = _stackelberg(world, arr, slack, workload, fmax)
        n_accepted = int(np.sum(beta > 0))
    elif p.policy == "le":
        alpha, beta, f_loc = baselines.le_decide(slack, workload, fmax, p)
        f_srv = g = np.zeros(n)
    elif p.policy == "dro":
        draws = world.policy_streams.rows(t)[v]
        off = np.where(draws[:, 0] < p.dro_offload_prob, draws[:, 1], 0.0)
        to_server = baselines.dro_admit(off, arr.demand, p.capacity)
        alpha = 1.0 - off
        beta = np.where(to_server, off, 0.0)
        cloud = np.where(to_server, 0.0, off)
        f_loc = fmax.copy()
        f_srv = np.where(to_server, p.f_server_max, 0.0)
        g = f_srv * p.drop_price * (1.0 - p.price_margin)
        n_accepted = int(np.sum(to_server))
    else:  # pragma: no cover - validate() rejects unknown policies
        raise ValueError(p.policy)
    drop = 1.0 - alpha - beta  # includes any cloud share

    # ---------------------------------------------------------------- vehicles
    _, _, d_total = exec_times(workload, alpha, beta, f_loc, np.where(beta > 0, f_srv, 1.0), q_prev)
    d_total = np.atleast_1d(d_total)
    done = (alpha + beta) > 0
    delay_sum = np.bincount(c[done], weights=d_total[done], minlength=S)[:S]
    delay_count = np.bincount(c[done], minlength=S)[:S].astype(float)

    added = np.zeros_like(world.queue)
    if n:
        added[v, c] = ratio(alpha * workload, f_loc)
    q_next = np.maximum(world.queue - p.slot_len, 0.0) + added
    w_next = update_virtual_queue(world.virtual, q_next, gamma[None, :])

    e_loc = local_energy(alpha, workload, f_loc, p.kappa)
    pay = ratio(beta * workload * g, f_srv)
    drop_cost = drop * workload * p.drop_price
    slot_cost = np.zeros(p.n_vehicles)
    np.add.at(slot_cost, v, e_loc + pay + drop_cost)
    if p.policy == "tdo":
        world.backlog_f = baselines.tdo_idle_frequency(world.backlog, max(p.f_local_max), p)
        world.backlog_f[v] = f_loc
        admitted = np.zeros(p.n_vehicles)
        admitted[v] = alpha * arr.size_units * p.bits_per_unit
        world.backlog = baselines.update_backlog(world.backlog, world.backlog_f, 1.0, admitted, p)

    # ------------------------------------------------------------------ server
    renewable = float(world.traces.renewable[t])
    price = float(world.traces.price[t])
    load = float(np.sum(server_energy(beta, workload, f_srv, p.kappa))) if n else 0.0
    deficit = max(load - renewable, 0.0)
    surplus = max(renewable - load, 0.0)
    B = world.battery
    grid = grid_purchase(B, world.theta, p.server_weight, price, deficit, p.discharge_cap, p.discharge_eff)
    charge = charge_amount(B, world.theta, p.server_weight, price, surplus, p.charge_cap, p.discharge_eff)
    try:
        b_next = update_battery(B, renewable, load, grid, charge, p.charge_eff, p.discharge_eff, p.charge_cap)
    except SimulationFault as exc:
        exc.state.update(world.snapshot())
        raise
    income = float(np.sum(pay))
    revenue = income - price * grid
    upper = battery_upper(world.theta, p.server_weight, price, p.discharge_eff, p.charge_eff, p.charge_cap)

    record = MetricsRecord(
        t=t, queue_mean=q_next.mean(axis=0) if p.n_vehicles else np.zeros(S),
        virtual_mean=w_next.mean(axis=0) if p.n_vehicles else np.zeros(S),
        delay_sum=delay_sum, delay_count=delay_count, battery=B, battery_next=b_next, battery_upper=upper,
        grid=grid, renewable=renewable, price=price, server_energy=load,
        discharge=p.discharge_eff * (deficit - grid), charge=charge, spill=surplus - charge,
        revenue=revenue, income=income, vehicle_cost=float(slot_cost.mean()) if p.n_vehicles else 0.0,
        energy_cost=float(np.sum(e_loc)), payment=float(np.sum(pay)), drop_cost=float(np.sum(drop_cost)),
        n_tasks=n, drop_fraction=float(np.mean(drop)) if n else 0.0, n_accepted=n_accepted,
        offloaded_units=float(np.sum(beta * arr.size_units)) if n else 0.0)
    decision = SlotDecision(alpha, beta, f_loc, f_srv, g, grid, charge)

    world.queue, world.virtual = q_next, w_next
    world.cost += slot_cost
    np.add.at(world.payments, v, pay)
    world.battery = b_next
    world.revenue += revenue
    world.income += income
    world.t += 1
    return decision, record


# ------------------------------------------------------------------- horizon


@dataclass
class MetricsSeries:
    params: SimParams
    theta: float
    records: List[MetricsRecord] = field(default_factory=list)
    total_payments: float = 0.0

    def __len__(self):
        return len(self.records)

    def column(self, name) -> np.ndarray:
        vals = [getattr(r, name) for r in self.records]
        if not vals:
            return np.zeros((0, self.params.n_classes)) if name in _PER_CLASS else np.zeros(0)
        return np.asarray(vals, dtype=float)

    def window(self, start: int, stop: int) -> "MetricsSeries":
        return MetricsSeries(self.params, self.theta, self.records[start:stop])

    def summary(self) -> dict:
        S = self.params.n_classes
        if not self.records:
            z = [0.0] * S
            return dict(n_slots=0, mean_queue=z, mean_virtual=z, mean_delay_class=z, mean_delay=0.0,
                        mean_vehicle_cost=0.0, total_revenue=0.0, mean_revenue=0.0, battery_min=0.0,
                        battery_max=0.0, battery_mean=0.0, drop_rate=0.0, acceptance_rate=0.0,
                        mean_unit_price=0.0, n_tasks=0, battery_violations=0)
        ds = self.column("delay_sum").sum(axis=0)
        dc = self.column("delay_count").sum(axis=0)
        n_tasks = float(self.column("n_tasks").sum())
        units = float(self.column("offloaded_units").sum())
        b = self.column("battery")
        return dict(
            n_slots=len(self.records),
            mean_queue=self.column("queue_mean").mean(axis=0).tolist(),
            mean_virtual=self.column("virtual_mean").mean(axis=0).tolist(),
            mean_delay_class=np.where(dc > 0, ds / np.maximum(dc, 1), 0.0).tolist(),
            mean_delay=float(ds.sum() / dc.sum()) if dc.sum() > 0 else 0.0,
            mean_vehicle_cost=float(self.column("vehicle_cost").mean()),
            total_revenue=float(self.column("revenue").sum()),
            mean_revenue=float(self.column("revenue").mean()),
            battery_min=float(b.min()), battery_max=float(b.max()), battery_mean=float(b.mean()),
            drop_rate=float((self.column("drop_fraction") * self.column("n_tasks")).sum() / n_tasks)
            if n_tasks else 0.0,
            acceptance_rate=float(self.column("n_accepted").sum() / n_tasks) if n_tasks else 0.0,
            mean_unit_price=float(self.column("income").sum() / units) if units > 0 else 0.0,
            n_tasks=int(n_tasks),
            battery_violations=int(np.sum((b < self.params.discharge_cap) | (b > self.column("battery_upper")))),
        )


_PER_CLASS = ("queue_mean", "virtual_mean", "delay_sum", "delay_count")


def run_horizon(params: SimParams, n_slots: Optional[int] = None, world: Optional[World] = None) -> MetricsSeries:
    n_slots = params.n_slots if n_slots is None else n_slots
    world = make_world(params, n_slots) if world is None else world
    series = MetricsSeries(params, world.theta)
    for _ in range(n_slots):
        _, rec = run_slot(world)
        series.records.append(rec)
    series.total_payments = float(world.payments.sum())
    return series
