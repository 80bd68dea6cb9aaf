"""Brute-force reference solvers.

Nothing here calls the closed-form split, the compiled searches or the dual
loop; only the objective evaluators are shared with the policy code.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .model import SimParams
from .server_policy import battery_is_rich, battery_upper
from .vehicle_policy import BidSet, freq_grid, p2_value

MAX_SERVER_VEHICLES = 3


# --------------------------------------------------------------- follower


def split_grid(step: float = 0.01):
    """All (alpha, beta) on a ``step`` lattice with alpha + beta <= 1."""
    k = int(round(1.0 / step))
    a, b = np.meshgrid(np.arange(k + 1), np.arange(k + 1), indexing="ij")
    keep = a + b <= k
    return a[keep] * step, b[keep] * step


def brute_force_p2(slack, workload, f_max, psi_off, params: SimParams, step: float = 0.01, n_freq: int = 64):
    """Exhaustive minimum of the follower objective over a split lattice times a log frequency grid.

    Returns ``(alpha, beta, f_local, value)``.
    """
    a, b = split_grid(step)
    f = freq_grid(f_max, params.f_local_floor, n_freq)
    A, F = a[:, None], f[None, :]
    B = b[:, None]
    vals = p2_value(slack, workload, A, B, F, psi_off, params.vehicle_weight, params.kappa, params.drop_price,
                    params.energy_term)
    i, j = np.unravel_index(np.argmin(vals), vals.shape)
    return float(a[i]), float(b[i]), float(f[j]), float(vals[i, j])


def p2_grid_slack(slack, workload, f_local, psi_off, params: SimParams, step: float = 0.01) -> float:
    """Upper bound on how far the lattice minimum can sit above the continuous minimum at fixed frequency.

    Uses the largest partial derivative of the objective in alpha and beta over the
    feasible triangle times half a lattice step.
    """
    t_max = workload / f_local
    energy = params.kappa * f_local * workload
    pay = 0.0 if not np.isfinite(psi_off) else workload * psi_off
    drop = params.drop_price * workload
    d_alpha = abs(slack) * t_max + t_max ** 2 + params.vehicle_weight * (energy + drop)
    d_beta = params.vehicle_weight * (energy + pay + drop)
    return 0.5 * step * (d_alpha + d_beta)


# ----------------------------------------------------------------- leader


def follower_share(psi, psi_loc, psi_cld, weight, f_local, workload):
    """Offloaded share a vehicle with fixed local frequency takes at offload price ``psi``.

    Written directly from the price ordering rather than through the policy code.
    """
    psi = np.asarray(psi, dtype=float)
    gain = weight * f_local ** 2 / workload
    local_first = (psi_loc <= psi) & (psi_loc <= psi_cld)
    offload_ok = psi <= psi_cld
    alpha = np.clip(gain * (np.where(offload_ok, psi, psi_cld) - psi_loc), 0.0, 1.0)
    return np.where(offload_ok, np.where(local_first, 1.0 - alpha, 1.0), 0.0)


def served_value(f, psi, i, bids: BidSet, battery_tilde: float, params: SimParams):
    """Leader objective contribution of serving bid ``i`` at ``(f, psi)``, with the follower's true response."""
    beta = follower_share(psi, bids.psi_loc[i], bids.psi_cld[i], params.vehicle_weight, bids.f_local[i],
                         bids.workload[i])
    coef = params.kappa * battery_tilde * params.discharge_eff
    return -beta * bids.workload[i] * (coef * f + params.server_weight * psi), beta


@dataclass
class ServerOracle:
    phi: float
    assignment: tuple  # per vehicle: True when served
    f_server: np.ndarray
    psi: np.ndarray
    served_best: np.ndarray  # best served value per vehicle (without the multiplier charge)


def _psi_points(i, f, bids: BidSet, params: SimParams, n: int):
    m = params.price_margin
    top = np.minimum((1.0 - m) * bids.psi_cld[i], params.g_max / f)
    u = np.linspace(0.0, 1.0, n)
    grid = top[:, None] * u[None, :]
    extra = np.array([bids.psi_loc[i], (1.0 - m) * bids.psi_loc[i], (1.0 - m) * bids.psi_cld[i]])
    extra = np.broadcast_to(extra, (len(f), 3))
    pts = np.concatenate([grid, np.minimum(np.maximum(extra, 0.0), top[:, None])], axis=1)
    return pts


def brute_force_server(bids: BidSet, battery_tilde: float, nu, params: SimParams, n_grid: int = 512) -> ServerOracle:
    """Exact minimum of the leader's Lagrangian at fixed multipliers over dense grids.

    Each vehicle is either rejected or served at a pair ``(f, psi)`` from an
    ``n_grid`` log grid over the feasible server frequencies times an ``n_grid``
    price grid (plus the reservation-price breakpoints); every accept/reject
    assignment is enumerated.
    """
    n = len(bids)
    if n > MAX_SERVER_VEHICLES:
        raise ValueError(f"brute_force_server handles at most {MAX_SERVER_VEHICLES} vehicles, got {n}")
    nu = np.asarray(nu, dtype=float)
    cap = np.asarray(params.capacity, dtype=float)
    best = np.full(n, np.inf)
    bf = np.zeros(n)
    bp = np.zeros(n)
    for i in range(n):
        f_lo = bids.workload[i] / params.server_deadline * (1.0 + 1e-9)
        if f_lo > params.f_server_max:
            continue
        f = np.exp(np.linspace(np.log(f_lo), np.log(params.f_server_max), n_grid))
        psi = _psi_points(i, f, bids, params, n_grid)
        val, beta = served_value(f[:, None], psi, i, bids, battery_tilde, params)
        val = np.where(beta > 0, val, np.inf)  # a zero share means the vehicle is not actually served
        j, k = np.unravel_index(np.argmin(val), val.shape)
        best[i], bf[i], bp[i] = val[j, k], f[j], psi[j, k]
    charge = np.asarray(bids.demand, dtype=float) @ nu
    phi_best, assign_best = np.inf, None
    for assign in itertools.product((False, True), repeat=n):
        total = -float(nu @ cap)
        for i, served in enumerate(assign):
            if served:
                total += best[i] + charge[i]
        if total < phi_best:
            phi_best, assign_best = total, assign
    mask = np.array(assign_best, dtype=bool) if n else np.zeros(0, dtype=bool)
    return ServerOracle(phi_best, tuple(assign_best or ()), np.where(mask, bf, 0.0), np.where(mask, bp, 0.0), best)


# ---------------------------------------------------------------- battery


@dataclass
class BatteryReport:
    violations: List[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def first(self):
        return self.violations[0] if self.violations else None


def battery_bound_check(battery, price, theta: float, params: SimParams) -> BatteryReport:
    """Check ``discharge_cap <= B_t <= upper(price_t)`` slot by slot.

    Each violation records the slot, the level, the bound crossed and whether the
    battery was in its discharging (rich) or charging branch at that slot.
    """
    battery = np.asarray(battery, dtype=float)
    price = np.asarray(price, dtype=float)
    report = BatteryReport()
    for t, (b, chi) in enumerate(zip(battery, price)):
        up = battery_upper(theta, params.server_weight, chi, params.discharge_eff, params.charge_eff,
                           params.charge_cap)
        branch = "discharge" if battery_is_rich(b, theta, params.server_weight, chi, params.discharge_eff) \
            else "charge"
        if b < params.discharge_cap:
            report.violations.append(dict(t=t, battery=float(b), bound="lower", limit=params.discharge_cap,
                                          branch=branch))
        elif b > up:
            report.violations.append(dict(t=t, battery=float(b), bound="upper", limit=float(up), branch=branch))
    return report
