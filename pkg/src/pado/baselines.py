"""Comparison policies: local execution (LE), random offloading (DRO) and backlog-driven offloading (TDO)."""
from __future__ import annotations

import enum

import numpy as np

from . import _kernels
from .model import SimParams, as_vector
from .vehicle_policy import GOLDEN_ITERS, N_FREQ_GRID


class PolicyKind(str, enum.Enum):
    PADO = "pado"
    LE = "le"
    DRO = "dro"
    TDO = "tdo"


def _search(kind, state, workload, f_max, psi_off, params: SimParams, drain=0.0):
    state = np.atleast_1d(np.asarray(state, dtype=float))
    n = state.shape[0]
    return _kernels.best_response(kind, np.ascontiguousarray(state), as_vector(workload, n), as_vector(f_max, n),
                                  as_vector(psi_off, n), float(params.vehicle_weight), float(params.kappa),
                                  float(params.drop_price), params.energy_term == "alpha_variant",
                                  float(params.f_local_floor), N_FREQ_GRID, GOLDEN_ITERS, float(drain))


def le_decide(slack, workload, f_max, params: SimParams):
    """Everything runs locally; the frequency minimises the same per-slot bound with beta fixed at 0.

    Returns ``(alpha, beta, f_local)`` arrays.
    """
    f, a, b, _ = _search(_kernels.LOCAL_ONLY, slack, workload, f_max, np.inf, params)
    return a, b, f


def dro_draw(rng: np.random.Generator, params: SimParams) -> float:
    """Offloaded fraction: uniform on [0, 1] with probability ``dro_offload_prob``, else 0.

    Always consumes two draws so the stream does not depend on the outcome.
    """
    coin, frac = rng.random(2)
    return float(frac) if coin < params.dro_offload_prob else 0.0


def dro_admit(beta, demand, capacity) -> np.ndarray:
    """First-come admission of offloaded parts while every resource has room left."""
    left = np.asarray(capacity, dtype=float).copy()
    demand = np.asarray(demand, dtype=float)
    ok = np.zeros(len(beta), dtype=bool)
    for i in range(len(beta)):
        if beta[i] > 0 and np.all(demand[i] <= left + 1e-12):
            ok[i] = True
            left -= demand[i]
    return ok


def dro_decide(rng: np.random.Generator, demand, capacity_left, params: SimParams):
    """One vehicle's random split; ``to_server`` is False when the offloaded part goes to the cloud."""
    beta = dro_draw(rng, params)
    to_server = beta > 0 and bool(np.all(np.asarray(demand) <= np.asarray(capacity_left) + 1e-12))
    return 1.0 - beta, beta, to_server


def backlog_seconds(backlog_bits, cycles_per_bit, f_max):
    """Backlog expressed as seconds of work at full local speed."""
    return np.asarray(backlog_bits, dtype=float) * cycles_per_bit / np.asarray(f_max, dtype=float)


def backlog_drain(params: SimParams) -> float:
    # every class queue drains one slot per slot
    return params.n_classes * params.slot_len


def tdo_decide(backlog_bits, workload, f_max, psi_off, params: SimParams):
    """Backlog drift-plus-cost rule; returns ``(alpha, beta, f_local)`` arrays.

    Minimises ``backlog * (arrival - served) + V * cost`` where the CPU serves the
    backlog at the chosen frequency for the whole slot and pays for that energy.
    The split is linear, so at each frequency one of the three pure actions wins.
    """
    state = backlog_seconds(backlog_bits, params.cycles_per_bit, f_max)
    f, a, b, _ = _search(_kernels.BACKLOG, state, workload, f_max, psi_off, params, backlog_drain(params))
    return a, b, f


def tdo_idle_frequency(backlog_bits, f_max, params: SimParams):
    """Frequency minimising the backlog objective when no task arrives (closed form)."""
    state = backlog_seconds(backlog_bits, params.cycles_per_bit, f_max)
    f = state / (2.0 * params.vehicle_weight * params.kappa * np.asarray(f_max, dtype=float))
    return np.clip(f, params.f_local_floor * np.asarray(f_max), f_max)


def tdo_local_price(backlog_bits, f_local, f_max, params: SimParams):
    """Unit price of local execution implied by the backlog rule (used as its bid)."""
    state = backlog_seconds(backlog_bits, params.cycles_per_bit, f_max)
    return state / (params.vehicle_weight * np.asarray(f_max)) + params.kappa * np.asarray(f_local)


def update_backlog(backlog_bits, f_local, alpha, size_bits, params: SimParams):
    served = np.asarray(f_local) * backlog_drain(params) / params.cycles_per_bit
    return np.maximum(np.asarray(backlog_bits, dtype=float) - served, 0.0) + np.asarray(alpha) * size_bits
