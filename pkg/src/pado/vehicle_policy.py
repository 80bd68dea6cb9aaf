"""Follower side: unit prices, the closed-form task split and the local frequency search."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .model import SimParams, TaskSpec, VehicleState, as_vector

N_FREQ_GRID = 64
GOLDEN_ITERS = 24
_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass
class UnitPrices:
    psi_loc: float
    psi_off: float
    psi_cld: float


@dataclass
class VehicleBid:
    vehicle: int
    task: TaskSpec
    alpha: float
    beta: float
    f_local: float
    slack: float
    psi_loc: float
    psi_cld: float

    @property
    def demand(self) -> np.ndarray:
        return self.task.demand


@dataclass
class BidSet:
    """Structure-of-arrays view of the bids the leader prices against."""

    vehicle: np.ndarray
    workload: np.ndarray
    demand: np.ndarray  # (n, K)
    f_local: np.ndarray
    slack: np.ndarray
    psi_loc: np.ndarray
    psi_cld: np.ndarray

    def __len__(self) -> int:
        return len(self.vehicle)

    @classmethod
    def from_bids(cls, bids: Sequence[VehicleBid], n_resources: int) -> "BidSet":
        if not bids:
            z = np.zeros(0)
            return cls(np.zeros(0, dtype=int), z, np.zeros((0, n_resources)), z, z, z, z)
        return cls(
            np.array([b.vehicle for b in bids], dtype=int),
            np.array([b.task.workload for b in bids]),
            np.vstack([b.task.demand for b in bids]),
            np.array([b.f_local for b in bids]),
            np.array([b.slack for b in bids]),
            np.array([b.psi_loc for b in bids]),
            np.array([b.psi_cld for b in bids]),
        )

    def subset(self, idx) -> "BidSet":
        return BidSet(self.vehicle[idx], self.workload[idx], self.demand[idx], self.f_local[idx],
                      self.slack[idx], self.psi_loc[idx], self.psi_cld[idx])


# ------------------------------------------------------------------- prices


def queue_slack(queue, virtual, slot_len, deadline):
    """``|Q - slot| + W - deadline`` for the task's own class."""
    return np.abs(np.asarray(queue, dtype=float) - slot_len) + virtual - deadline


def local_price(slack, f_local, weight, kappa):
    return np.asarray(slack) / (weight * np.asarray(f_local)) + kappa * np.asarray(f_local)


def offload_price(f_server, g):
    f_server = np.asarray(f_server, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(f_server > 0, np.asarray(g, dtype=float) / np.where(f_server > 0, f_server, 1.0), np.inf)


def unit_prices(state: VehicleState, task: TaskSpec, f_local: float, f_server: float, g: float,
                params: SimParams) -> UnitPrices:
    s = task.delay_class - 1
    slack = queue_slack(state.queue[s], state.virtual[s], params.slot_len, params.gamma[s])
    return UnitPrices(float(local_price(slack, f_local, params.vehicle_weight, params.kappa)),
                      float(offload_price(f_server, g)), float(params.drop_price))


# -------------------------------------------------------------------- split


def choose_split(psi_loc, psi_off, psi_cld, weight, f_local, workload):
    """Closed-form (alpha, beta) from the ordering of the three unit prices.

    Ties resolve as local before offload before cloud, so exactly one case fires.
    Broadcasts over arrays.
    """
    psi_loc, psi_off, psi_cld = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (psi_loc, psi_off, psi_cld)))
    local_first = (psi_loc <= psi_off) & (psi_loc <= psi_cld)
    offload_beats_cloud = psi_off <= psi_cld
    gain = weight * np.asarray(f_local, dtype=float) ** 2 / np.asarray(workload, dtype=float)
    with np.errstate(invalid="ignore", over="ignore"):
        second = np.where(offload_beats_cloud, psi_off, psi_cld)
        alpha_local = np.clip(gain * (second - psi_loc), 0.0, 1.0)
    alpha = np.where(local_first, alpha_local, 0.0)
    beta = np.where(local_first,
                    np.where(offload_beats_cloud, 1.0 - alpha, 0.0),
                    np.where(offload_beats_cloud, 1.0, 0.0))
    alpha = np.nan_to_num(alpha)
    if alpha.ndim == 0:
        return float(alpha), float(beta)
    return alpha, beta


def choose_split_prices(prices: UnitPrices, weight: float, f_local: float, task: TaskSpec):
    return choose_split(prices.psi_loc, prices.psi_off, prices.psi_cld, weight, f_local, task.workload)


# ---------------------------------------------------------------- objective


def p2_value(slack, workload, alpha, beta, f_local, psi_off, weight, kappa, drop_price, energy_term="alpha_variant"):
    """Per-slot drift-plus-penalty bound minimised by a vehicle (array version).

    ``psi_off`` is the offload price per cycle (``g / f_server``); the payment
    term is zero whenever ``beta == 0`` so an absent offer may use ``inf``.
    """
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    t_local = alpha * workload / f_local
    energy_frac = beta if energy_term == "as_printed" else alpha
    with np.errstate(invalid="ignore"):
        payment = np.where(beta > 0, beta * workload * psi_off, 0.0)
    penalty = kappa * energy_frac * f_local * workload + payment + (1.0 - alpha - beta) * drop_price * workload
    out = slack * t_local + 0.5 * t_local ** 2 + weight * penalty
    return float(out) if np.ndim(out) == 0 else out


def p2_objective(state: VehicleState, task: TaskSpec, alpha, beta, f_local, f_server, g, params: SimParams):
    s = task.delay_class - 1
    slack = queue_slack(state.queue[s], state.virtual[s], params.slot_len, params.gamma[s])
    psi_off = offload_price(f_server, g) if beta > 0 else np.inf
    return p2_value(slack, task.workload, alpha, beta, f_local, psi_off, params.vehicle_weight,
                    params.kappa, params.drop_price, params.energy_term)


# ---------------------------------------------------------- frequency search


def freq_grid(f_max, floor: float, n: int = N_FREQ_GRID) -> np.ndarray:
    """Log-spaced frequencies from ``floor * f_max`` to ``f_max``; shape (..., n)."""
    f_max = np.asarray(f_max, dtype=float)
    return f_max[..., None] * np.logspace(np.log10(floor), 0.0, n)


def _eval_at(f, slack, workload, psi_off, params: SimParams):
    psi_loc = local_price(slack, f, params.vehicle_weight, params.kappa)
    a, b = choose_split(psi_loc, psi_off, params.drop_price, params.vehicle_weight, f, workload)
    val = p2_value(slack, workload, a, b, f, psi_off, params.vehicle_weight, params.kappa,
                   params.drop_price, params.energy_term)
    return np.asarray(val), np.asarray(a), np.asarray(b)


def best_response_reference(slack, workload, f_max, psi_off, params: SimParams):
    """Vectorised follower decision over n tasks (numpy reference of :func:`best_response`).

    Minimises the drift-plus-penalty bound over the local frequency, taking at each
    candidate frequency the closed-form split. A 64-point log grid locates the
    basin and a golden-section pass refines it; the refined point is kept only when
    it is at least as good as the best grid point.

    Returns ``(f_local, alpha, beta, value)`` arrays of shape (n,).
    """
    slack = np.atleast_1d(np.asarray(slack, dtype=float))
    n = slack.shape[0]
    workload = np.broadcast_to(np.asarray(workload, dtype=float), (n,))
    f_max = np.broadcast_to(np.asarray(f_max, dtype=float), (n,))
    psi_off = np.broadcast_to(np.asarray(psi_off, dtype=float), (n,))
    if n == 0:
        z = np.zeros(0)
        return z, z, z, z

    grid = freq_grid(f_max, params.f_local_floor)  # (n, G)
    vals, _, _ = _eval_at(grid, slack[:, None], workload[:, None], psi_off[:, None], params)
    k = np.argmin(vals, axis=1)
    rows = np.arange(n)
    best_f = grid[rows, k]
    best_v = vals[rows, k]

    lo = np.log(grid[rows, np.maximum(k - 1, 0)])
    hi = np.log(grid[rows, np.minimum(k + 1, grid.shape[1] - 1)])
    x1 = hi - _INVPHI * (hi - lo)
    x2 = lo + _INVPHI * (hi - lo)
    v1, _, _ = _eval_at(np.exp(x1), slack, workload, psi_off, params)
    v2, _, _ = _eval_at(np.exp(x2), slack, workload, psi_off, params)
    for _ in range(GOLDEN_ITERS):
        left = v1 <= v2
        hi = np.where(left, x2, hi)
        lo = np.where(left, lo, x1)
        x2n = np.where(left, x1, lo + _INVPHI * (hi - lo))
        x1n = np.where(left, hi - _INVPHI * (hi - lo), x2)
        xnew = np.where(left, x1n, x2n)
        vnew, _, _ = _eval_at(np.exp(xnew), slack, workload, psi_off, params)
        v1, v2 = np.where(left, vnew, v2), np.where(left, v1, vnew)
        x1, x2 = x1n, x2n
    xg = np.where(v1 <= v2, x1, x2)
    vg = np.minimum(v1, v2)
    take = vg < best_v
    best_f = np.where(take, np.exp(xg), best_f)
    best_f = np.minimum(best_f, f_max)

    val, a, b = _eval_at(best_f, slack, workload, psi_off, params)
    # nothing runs locally: report f_max when that costs no more
    vmax, amax, bmax = _eval_at(f_max, slack, workload, psi_off, params)
    conv = (a == 0) & (vmax <= val + 1e-12 * np.abs(val))
    best_f = np.where(conv, f_max, best_f)
    a = np.where(conv, amax, a)
    b = np.where(conv, bmax, b)
    val = np.where(conv, vmax, val)
    return best_f, a, b, val


def best_response(slack, workload, f_max, psi_off, params: SimParams):
    """Compiled version of :func:`best_response_reference`; same contract."""
    slack = np.atleast_1d(np.asarray(slack, dtype=float))
    n = slack.shape[0]
    return _kernels.best_response(_kernels.PADO, slack, as_vector(workload, n), as_vector(f_max, n),
                                  as_vector(psi_off, n),
                                  float(params.vehicle_weight), float(params.kappa), float(params.drop_price),
                                  params.energy_term == "alpha_variant", float(params.f_local_floor),
                                  N_FREQ_GRID, GOLDEN_ITERS, 0.0)


def choose_local_frequency(state: VehicleState, task: TaskSpec, params: SimParams,
                           f_server: Optional[float] = None, g: Optional[float] = None) -> float:
    """Pre-allocated local frequency for one task (no offer means offloading is unavailable)."""
    s = task.delay_class - 1
    slack = queue_slack(state.queue[s], state.virtual[s], params.slot_len, params.gamma[s])
    psi_off = np.inf if f_server is None else offload_price(f_server, g)
    f, _, _, _ = best_response(slack, task.workload, params.f_local_max[s], psi_off, params)
    return float(f[0])


def decide(state: VehicleState, task: TaskSpec, params: SimParams, f_server: Optional[float] = None,
           g: Optional[float] = None):
    """Full follower decision ``(alpha, beta, f_local)`` for one task."""
    s = task.delay_class - 1
    slack = queue_slack(state.queue[s], state.virtual[s], params.slot_len, params.gamma[s])
    psi_off = np.inf if f_server is None else offload_price(f_server, g)
    f, a, b, _ = best_response(slack, task.workload, params.f_local_max[s], psi_off, params)
    return float(a[0]), float(b[0]), float(f[0])
