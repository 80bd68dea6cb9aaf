"""Leader side: perturbed battery control, grid purchasing and the pricing game solver."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import _kernels
from .model import SimParams, ratio
from .vehicle_policy import BidSet

# --------------------------------------------------------------------- traces


@dataclass
class EnergyTraces:
    renewable: np.ndarray  # J per slot, within [0, renewable_peak]
    price: np.ndarray  # grid price per J, > 0

    def __len__(self) -> int:
        return len(self.renewable)


def load_trace(path) -> np.ndarray:
    """One value per line; blank lines and ``#`` comments are skipped."""
    vals = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            vals.append(float(line))
    return np.asarray(vals, dtype=float)


def save_trace(path, values) -> None:
    Path(path).write_text("".join(f"{float(v)!r}\n" for v in values))


def _cycle(values: np.ndarray, n: int) -> np.ndarray:
    if n == 0:
        return np.zeros(0)
    if len(values) == 0:
        raise ValueError("empty trace file")
    return np.resize(values, n)


def renewable_trace(params: SimParams, n: int, rng: np.random.Generator) -> np.ndarray:
    if params.renewable_trace == "file":
        u = _cycle(load_trace(params.renewable_file), n)
    else:
        t = np.arange(n)
        base = params.renewable_peak * np.sin(np.pi * (t % params.renewable_period) / params.renewable_period)
        noise = rng.uniform(-params.renewable_noise, params.renewable_noise, size=n) * params.renewable_peak
        u = base + noise
    return np.clip(u, 0.0, params.renewable_peak)


def price_trace(params: SimParams, n: int) -> np.ndarray:
    if params.price_trace == "file":
        return _cycle(load_trace(params.price_file), n)
    if params.price_trace == "two_level":
        t = np.arange(n)
        high = (t // params.price_period) % 2 == 1
        return np.where(high, params.price_high, params.price_low).astype(float)
    return np.full(n, float(params.price_low))


def make_traces(params: SimParams, n: Optional[int] = None, rng: Optional[np.random.Generator] = None) -> EnergyTraces:
    n = params.n_slots if n is None else n
    rng = np.random.default_rng(params.seed) if rng is None else rng
    tr = EnergyTraces(renewable_trace(params, n, rng), price_trace(params, n))
    if np.any(tr.price <= 0):
        raise ValueError("grid price trace must be strictly positive")
    return tr


def theta_price(params: SimParams, traces: EnergyTraces) -> float:
    """Price used to size the perturbation; must dominate every slot's price."""
    top = float(np.max(traces.price)) if len(traces) else float(params.price_low)
    if params.price_cap is None:
        return top
    if params.price_cap < top:
        raise ValueError(f"price_cap={params.price_cap} below trace maximum {top}")
    return float(params.price_cap)


# ---------------------------------------------------------------- battery side


def perturbation_theta(weight: float, price_max: float, discharge_eff: float, discharge_cap: float) -> float:
    return weight * price_max / discharge_eff + discharge_cap


def battery_upper(theta, weight, price, discharge_eff, charge_eff, charge_cap):
    """Upper edge of the confinement interval at grid price ``price``."""
    return theta - weight * price / discharge_eff + charge_eff * charge_cap


def battery_is_rich(battery, theta, weight, price, discharge_eff) -> bool:
    return (battery - theta) * discharge_eff + weight * price > 0


def grid_purchase(battery, theta, weight, price, deficit, discharge_cap, discharge_eff=1.0) -> float:
    """Grid energy bought this slot.

    A rich battery covers up to ``discharge_cap`` of the deficit and the grid the
    rest; otherwise the grid covers all of it.
    """
    if deficit < 0:
        raise ValueError("deficit must be non-negative")
    if battery_is_rich(battery, theta, weight, price, discharge_eff):
        return max(deficit - discharge_cap, 0.0)
    return float(deficit)


def charge_amount(battery, theta, weight, price, surplus, charge_cap, discharge_eff) -> float:
    """Renewable surplus stored this slot; only a battery below its threshold charges."""
    if battery_is_rich(battery, theta, weight, price, discharge_eff):
        return 0.0
    return min(charge_cap, max(surplus, 0.0))


def server_revenue(beta, workload, f_server, g, price, grid) -> float:
    beta = np.asarray(beta, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        pay = np.where(beta > 0, beta * np.asarray(workload) / np.where(beta > 0, f_server, 1.0) * g, 0.0)
    return float(np.sum(pay)) - price * grid


# ------------------------------------------------------------- dual machinery


def update_multipliers(nu, step, usage, capacity, rule: str = "ascent"):
    """Projected subgradient step on the capacity multipliers."""
    nu = np.asarray(nu, dtype=float)
    sub = np.asarray(usage, dtype=float) - np.asarray(capacity, dtype=float)
    if rule == "printed":
        return np.maximum(nu - step * sub, 0.0)
    return np.maximum(nu + step * sub, 0.0)


def case_objectives(workload, demand, psi_loc, f_local, f_server, g, battery_tilde, nu, params: SimParams):
    """The three per-vehicle objectives (full offload, partial offload, not served)."""
    demand = np.asarray(demand, dtype=float)
    nu = np.asarray(nu, dtype=float)
    cap = np.asarray(params.capacity, dtype=float)
    psi = float(g) / float(f_server)
    coef = float(params.kappa * battery_tilde * params.discharge_eff)
    printed = params.lambda2_form == "printed"
    args = (float(f_server), psi, float(workload), float(psi_loc), float(f_local), float(params.vehicle_weight),
            coef, float(params.server_weight), printed, float(params.lambda2_t))
    lam1 = _kernels.service_value(1, *args)
    lam2 = _kernels.service_value(2, *args)
    shared = float(nu @ (demand - cap))
    return lam1 + shared, lam2 + shared, -float(nu @ cap)


@dataclass
class CaseSearch:
    """Best served-vehicle terms per bid: columns are case 1 and case 2."""

    value: np.ndarray
    f_server: np.ndarray
    psi: np.ndarray

    @property
    def best_case(self) -> np.ndarray:
        return np.argmin(self.value, axis=1) + 1

    @property
    def best_value(self) -> np.ndarray:
        return np.min(self.value, axis=1) if self.value.size else np.zeros(0)


def frequency_window(workload, params: SimParams):
    lo = np.asarray(workload, dtype=float) / params.server_deadline * (1.0 + 1e-9)
    hi = np.full_like(lo, params.f_server_max)
    return lo, hi


def search_cases(bids: BidSet, battery_tilde: float, params: SimParams) -> CaseSearch:
    f_lo, f_hi = frequency_window(bids.workload, params)
    val, f, psi = _kernels.search_cases(
        np.ascontiguousarray(bids.workload, dtype=float), np.ascontiguousarray(bids.psi_loc, dtype=float),
        np.ascontiguousarray(bids.psi_cld, dtype=float), np.ascontiguousarray(bids.f_local, dtype=float),
        f_lo, f_hi, float(params.vehicle_weight), float(params.kappa * battery_tilde * params.discharge_eff),
        float(params.server_weight), params.lambda2_form == "printed", float(params.lambda2_t),
        float(params.price_margin), float(params.g_max), int(params.grid_points), int(params.refine_iters))
    return CaseSearch(val, f, psi)


def dual_value(service, demand, nu, capacity):
    """Inner minimum of the leader's Lagrangian at fixed multipliers.

    Returns ``(value, accepted_mask)``; a vehicle is served when its best served
    term plus its resource charge beats rejection.
    """
    charged = service + demand @ nu
    accept = charged < 0
    return float(np.sum(np.where(accept, charged, 0.0)) - nu @ capacity), accept


@dataclass
class ServerOffer:
    vehicle: np.ndarray
    accepted: np.ndarray
    case: np.ndarray  # 1 full offload, 2 partial offload, 3 not served
    f_server: np.ndarray
    g: np.ndarray
    nu: np.ndarray
    iterations: int
    phi: float
    converged: bool
    phi_history: list = field(default_factory=list)
    service: Optional[np.ndarray] = None

    @property
    def psi(self) -> np.ndarray:
        return np.where(self.accepted, ratio(self.g, self.f_server), np.inf)

    def usage(self, demand) -> np.ndarray:
        return np.asarray(demand)[self.accepted].sum(axis=0)


def _auto_scale(service, demand):
    finite = np.isfinite(service) & (service < 0)
    if not np.any(finite):
        return 0.0
    per_unit = -service[finite] / np.maximum(demand[finite].sum(axis=1), 1e-300)
    return float(np.max(per_unit))


def dual_loop_reference(service, demand, nu, cap, step, tol, max_iter, rule="ascent"):
    """Safeguarded subgradient loop; returns ``(nu, phi, accept, iterations, converged, history)``."""
    phi, accept = dual_value(service, demand, nu, cap)
    history = [phi]
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        usage = demand[accept].sum(axis=0)
        lr = step / math.sqrt(it)
        cand = update_multipliers(nu, lr, usage, cap, rule)
        cphi, caccept = dual_value(service, demand, cand, cap)
        if rule == "ascent":
            halvings = 0
            while cphi < phi and halvings < 40:
                lr *= 0.5
                cand = update_multipliers(nu, lr, usage, cap)
                cphi, caccept = dual_value(service, demand, cand, cap)
                halvings += 1
            if cphi < phi:
                cand, cphi, caccept = nu, phi, accept
        delta = abs(cphi - phi)
        nu, phi, accept = cand, cphi, caccept
        history.append(phi)
        if delta < tol:
            converged = True
            break
    return nu, phi, accept, it, converged, history


def dual_loop(service, demand, nu, cap, step, tol, max_iter, rule="ascent"):
    """Compiled :func:`dual_loop_reference`."""
    nu, phi, accept, it, conv, hist = _kernels.dual_ascent(
        np.ascontiguousarray(service, dtype=float), np.ascontiguousarray(demand, dtype=float),
        np.asarray(nu, dtype=float), np.asarray(cap, dtype=float), float(step), float(tol), int(max_iter),
        rule == "printed")
    return nu, float(phi), accept, int(it), bool(conv), hist.tolist()


def solve_offer(bids: BidSet, battery_tilde: float, nu_init, params: SimParams,
                search: Optional[CaseSearch] = None, reference: bool = False) -> ServerOffer:
    """Price and allocate server CPU for this slot's bids.

    The per-vehicle (f, g) minimisations do not depend on the multipliers (they
    only add a constant per served vehicle), so they are solved once; the dual
    loop then re-selects each vehicle's cheapest case at every multiplier update
    and stops once the dual value moves less than the tolerance. Ascent steps
    that would lower the dual value are halved until they do not, which keeps
    the iterates monotone. Any capacity overshoot left at the final multipliers is
    removed by rejecting the least valuable served vehicles.
    """
    K = len(params.capacity)
    cap = np.asarray(params.capacity, dtype=float)
    n = len(bids)
    nu = np.zeros(K) if nu_init is None else np.asarray(nu_init, dtype=float).copy()
    if n == 0:
        z = np.zeros(0)
        return ServerOffer(np.zeros(0, dtype=int), np.zeros(0, dtype=bool), np.zeros(0, dtype=int), z, z,
                           nu, 0, 0.0, True, [0.0], z)
    if search is None:
        search = search_cases(bids, battery_tilde, params)
    service = search.best_value
    demand = np.asarray(bids.demand, dtype=float)

    scale = _auto_scale(service, demand)
    if nu_init is None:
        nu = np.full(K, params.dual_init if params.dual_init is not None else scale)
    step = params.dual_step if params.dual_step is not None else scale / max(float(np.mean(cap)), 1.0)
    finite = np.isfinite(service)
    tol = params.dual_tol * max(float(np.sum(np.abs(service[finite]))), 1e-300)

    loop = dual_loop_reference if reference else dual_loop
    nu, phi, accept, it, converged, history = loop(service, demand, nu, cap, step, tol, params.dual_max_iter,
                                                   params.dual_update)
    accepted = accept.copy()
    charged = service + demand @ nu
    over = demand[accepted].sum(axis=0) - cap
    while np.any(over > 1e-12) and np.any(accepted):
        users = accepted & np.any(demand[:, over > 1e-12] > 0, axis=1)
        worst = np.flatnonzero(users)[np.argmax(charged[users])]
        accepted[worst] = False
        over = demand[accepted].sum(axis=0) - cap

    best = np.argmin(np.where(np.isfinite(search.value), search.value, np.inf), axis=1)
    rows = np.arange(n)
    f = np.where(accepted, search.f_server[rows, best], 0.0)
    psi = np.where(accepted, search.psi[rows, best], 0.0)
    case = np.where(accepted, best + 1, 3)
    return ServerOffer(bids.vehicle.copy(), accepted, case, f, psi * f, nu, it, phi, converged, history, service)


def offer_phi(offer: ServerOffer, bids: BidSet, nu, params: SimParams) -> float:
    """Lagrangian value of a concrete offer's inner choices (before capacity repair)."""
    cap = np.asarray(params.capacity, dtype=float)
    _, accept = dual_value(offer.service, np.asarray(bids.demand), np.asarray(nu), cap)
    return float(np.sum(np.where(accept, offer.service + bids.demand @ nu, 0.0)) - nu @ cap)
