"""Compiled scalar kernels for the per-slot searches.

These mirror the numpy reference implementations in ``vehicle_policy`` and
``server_policy`` (the test-suite checks they agree); the simulator calls these
because a 10^4-slot run makes millions of tiny evaluations.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@njit(cache=True)
def split1(psi_loc, psi_off, psi_cld, gain):
    offload_beats_cloud = psi_off <= psi_cld
    if psi_loc <= psi_off and psi_loc <= psi_cld:
        second = psi_off if offload_beats_cloud else psi_cld
        a = gain * (second - psi_loc)
        if a > 1.0:
            a = 1.0
        elif not a > 0.0:
            a = 0.0
        return a, (1.0 - a) if offload_beats_cloud else 0.0
    return 0.0, 1.0 if offload_beats_cloud else 0.0


@njit(cache=True)
def p2_1(slack, workload, a, b, f, psi_off, weight, kappa, drop, alpha_energy):
    t = a * workload / f
    e = a if alpha_energy else b
    pay = b * workload * psi_off if b > 0.0 else 0.0
    return slack * t + 0.5 * t * t + weight * (kappa * e * f * workload + pay + (1.0 - a - b) * drop * workload)


PADO = 0
LOCAL_ONLY = 1
BACKLOG = 2


@njit(cache=True)
def eval_f(kind, f, state, workload, psi_off, weight, kappa, drop, alpha_energy, fmax, drain):
    """Objective and split at frequency ``f`` for one follower rule.

    ``state`` is the class slack (PADO, LOCAL_ONLY) or the backlog in seconds of
    work at ``fmax`` (BACKLOG); ``drain`` is the backlog service per unit frequency.
    """
    if kind == PADO:
        psi_loc = state / (weight * f) + kappa * f
        a, b = split1(psi_loc, psi_off, drop, weight * f * f / workload)
        return p2_1(state, workload, a, b, f, psi_off, weight, kappa, drop, alpha_energy), a, b
    if kind == LOCAL_ONLY:
        return p2_1(state, workload, 1.0, 0.0, f, psi_off, weight, kappa, drop, alpha_energy), 1.0, 0.0
    # backlog rule: serving ``f * drain`` seconds of CPU costs kappa f^2 per second;
    # the task split is linear, so one of the three pure actions wins
    base = -state * f * drain / fmax + weight * kappa * f * f * drain
    c_loc = state * workload / fmax  # its energy is charged when served
    c_off = weight * workload * psi_off if psi_off < np.inf else np.inf
    c_drop = weight * workload * drop
    if c_loc <= c_off and c_loc <= c_drop:
        return base + c_loc, 1.0, 0.0
    if c_off <= c_drop:
        return base + c_off, 0.0, 1.0
    return base + c_drop, 0.0, 0.0


@njit(cache=True)
def best_response(kind, state, workload, fmax, psi_off, weight, kappa, drop, alpha_energy, floor, ngrid, niters,
                  drain):
    n = state.shape[0]
    fo = np.empty(n)
    ao = np.empty(n)
    bo = np.empty(n)
    vo = np.empty(n)
    lfl = math.log(floor)
    for i in range(n):
        fm = fmax[i]
        lmax = math.log(fm)
        step = -lfl / (ngrid - 1)
        bk = 0
        bv = np.inf
        for k in range(ngrid):
            x = lmax + lfl + k * step
            v, _, _ = eval_f(kind, math.exp(x), state[i], workload[i], psi_off[i], weight, kappa, drop,
                             alpha_energy, fm, drain)
            if v < bv:
                bv = v
                bk = k
        best_x = lmax + lfl + bk * step
        if bk == ngrid - 1:
            best_x = lmax
        lo = lmax + lfl + max(bk - 1, 0) * step
        hi = min(lmax + lfl + min(bk + 1, ngrid - 1) * step, lmax)
        x1 = hi - INVPHI * (hi - lo)
        x2 = lo + INVPHI * (hi - lo)
        v1, _, _ = eval_f(kind, math.exp(x1), state[i], workload[i], psi_off[i], weight, kappa, drop, alpha_energy,
                          fm, drain)
        v2, _, _ = eval_f(kind, math.exp(x2), state[i], workload[i], psi_off[i], weight, kappa, drop, alpha_energy,
                          fm, drain)
        for _ in range(niters):
            if v1 <= v2:
                hi = x2
                x2 = x1
                v2 = v1
                x1 = hi - INVPHI * (hi - lo)
                v1, _, _ = eval_f(kind, math.exp(x1), state[i], workload[i], psi_off[i], weight, kappa, drop,
                                  alpha_energy, fm, drain)
            else:
                lo = x1
                x1 = x2
                v1 = v2
                x2 = lo + INVPHI * (hi - lo)
                v2, _, _ = eval_f(kind, math.exp(x2), state[i], workload[i], psi_off[i], weight, kappa, drop,
                                  alpha_energy, fm, drain)
        if v1 <= v2:
            if v1 < bv:
                bv = v1
                best_x = x1
        elif v2 < bv:
            bv = v2
            best_x = x2
        f = min(math.exp(best_x), fm)
        v, a, b = eval_f(kind, f, state[i], workload[i], psi_off[i], weight, kappa, drop, alpha_energy, fm, drain)
        if a == 0.0:
            vm, am, bm = eval_f(kind, fm, state[i], workload[i], psi_off[i], weight, kappa, drop, alpha_energy,
                                fm, drain)
            if vm <= v + 1e-12 * abs(v):
                f, v, a, b = fm, vm, am, bm
        fo[i] = f
        ao[i] = a
        bo[i] = b
        vo[i] = v
    return fo, ao, bo, vo


# ------------------------------------------------------------------ leader


@njit(cache=True)
def service_value(case, f, psi, workload, psi_loc, f_local, weight, energy_coef, h, printed, t_factor):
    """Leader's per-vehicle term for a served vehicle; ``energy_coef = kappa * B_tilde * eta_minus``."""
    if case == 1:
        return -workload * (energy_coef * f + h * psi)
    fl2 = f_local * f_local
    if printed:
        return (h * fl2 * psi * psi + (energy_coef * f * fl2 - workload * t_factor * h) * psi
                - workload * t_factor * energy_coef * f)
    a = weight * fl2 / workload * (psi - psi_loc)
    if a > 1.0:
        a = 1.0
    elif not a > 0.0:
        a = 0.0
    return -(1.0 - a) * workload * (energy_coef * f + h * psi)


@njit(cache=True)
def psi_bounds(case, f, psi_loc, psi_cld, margin, g_max):
    if case == 1:
        lo = 0.0
        hi = (1.0 - margin) * min(psi_loc, psi_cld)
        if not hi > 0.0:
            return 0.0, -1.0
    else:
        if not psi_loc < (1.0 - margin) * psi_cld:
            return 0.0, -1.0
        lo = max(psi_loc, 0.0)
        hi = (1.0 - margin) * psi_cld
    hi = min(hi, g_max / f)
    return lo, hi


@njit(cache=True)
def _eval_point(case, x, u, workload, psi_loc, psi_cld, f_local, weight, energy_coef, h, printed, t_factor,
                margin, g_max):
    f = math.exp(x)
    lo, hi = psi_bounds(case, f, psi_loc, psi_cld, margin, g_max)
    if hi < lo:
        return np.inf, f, 0.0
    psi = lo + u * (hi - lo)
    return service_value(case, f, psi, workload, psi_loc, f_local, weight, energy_coef, h, printed, t_factor), f, psi


@njit(cache=True)
def search_cases(workload, psi_loc, psi_cld, f_local, f_lo, f_hi, weight, energy_coef, h, printed, t_factor,
                 margin, g_max, ngrid, niters):
    """Minimise the served-vehicle term for cases 1 and 2 over (f_server, price per cycle).

    Grid over log f and the normalised position u of the price inside its
    feasible interval, then a compass search with step halving.
    Returns arrays (n, 2) of value, f, psi; ``inf`` marks an infeasible case.
    """
    n = workload.shape[0]
    val = np.full((n, 2), np.inf)
    fo = np.zeros((n, 2))
    po = np.zeros((n, 2))
    for i in range(n):
        if not f_lo[i] <= f_hi[i]:
            continue
        xlo = math.log(f_lo[i])
        xhi = math.log(f_hi[i])
        for c in range(2):
            case = c + 1
            bv = np.inf
            bx = xlo
            bu = 0.0
            # with an f-independent price interval the term is linear in f: ends suffice
            lo0, hi0 = psi_bounds(case, f_lo[i], psi_loc[i], psi_cld[i], margin, g_max)
            lo1, hi1 = psi_bounds(case, f_hi[i], psi_loc[i], psi_cld[i], margin, g_max)
            ends_only = lo0 == lo1 and hi0 == hi1
            for j in range(ngrid):
                if ends_only and 0 < j < ngrid - 1:
                    continue
                x = xlo + (xhi - xlo) * j / (ngrid - 1)
                if j == ngrid - 1:
                    x = xhi
                f = math.exp(x)
                lo, hi = psi_bounds(case, f, psi_loc[i], psi_cld[i], margin, g_max)
                if hi < lo:
                    continue
                for k in range(ngrid):
                    if case == 1 and 0 < k < ngrid - 1:
                        continue  # linear in the price: the grid minimum sits at an end
                    u = k / (ngrid - 1)
                    v = service_value(case, f, lo + u * (hi - lo), workload[i], psi_loc[i], f_local[i], weight,
                                      energy_coef, h, printed, t_factor)
                    if v < bv:
                        bv = v
                        bx = x
                        bu = u
            if bv == np.inf:
                continue
            sx = (xhi - xlo) / (ngrid - 1)
            su = 1.0 / (ngrid - 1)
            for _ in range(niters):
                moved = False
                for d in range(4):
                    x = bx
                    u = bu
                    if d == 0:
                        x = min(bx + sx, xhi)
                    elif d == 1:
                        x = max(bx - sx, xlo)
                    elif d == 2:
                        u = min(bu + su, 1.0)
                    else:
                        u = max(bu - su, 0.0)
                    v, _, _ = _eval_point(case, x, u, workload[i], psi_loc[i], psi_cld[i], f_local[i], weight,
                                          energy_coef, h, printed, t_factor, margin, g_max)
                    if v < bv:
                        bv = v
                        bx = x
                        bu = u
                        moved = True
                if not moved:
                    sx *= 0.5
                    su *= 0.5
            v, f, psi = _eval_point(case, bx, bu, workload[i], psi_loc[i], psi_cld[i], f_local[i], weight,
                                    energy_coef, h, printed, t_factor, margin, g_max)
            val[i, c] = v
            fo[i, c] = f
            po[i, c] = psi
    return val, fo, po


# -------------------------------------------------------------------- dual


@njit(cache=True)
def dual_value(service, demand, nu, cap):
    n, k = demand.shape
    total = 0.0
    accept = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        c = service[i]
        for j in range(k):
            c += demand[i, j] * nu[j]
        if c < 0.0:
            accept[i] = True
            total += c
    for j in range(k):
        total -= nu[j] * cap[j]
    return total, accept


@njit(cache=True)
def _step(nu, lr, demand, accept, cap, sign):
    n, k = demand.shape
    out = np.empty(k)
    for j in range(k):
        u = 0.0
        for i in range(n):
            if accept[i]:
                u += demand[i, j]
        out[j] = max(nu[j] + sign * lr * (u - cap[j]), 0.0)
    return out


@njit(cache=True)
def dual_ascent(service, demand, nu0, cap, step, tol, max_iter, printed):
    """Projected subgradient loop on the capacity multipliers (see ``server_policy.dual_loop``)."""
    nu = nu0.copy()
    phi, accept = dual_value(service, demand, nu, cap)
    history = np.empty(max_iter + 1)
    history[0] = phi
    sign = -1.0 if printed else 1.0
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        lr = step / math.sqrt(it)
        cand = _step(nu, lr, demand, accept, cap, sign)
        cphi, caccept = dual_value(service, demand, cand, cap)
        if not printed:
            h = 0
            while cphi < phi and h < 40:
                lr *= 0.5
                cand = _step(nu, lr, demand, accept, cap, sign)
                cphi, caccept = dual_value(service, demand, cand, cap)
                h += 1
            if cphi < phi:
                cand = nu
                cphi = phi
                caccept = accept
        delta = abs(cphi - phi)
        nu = cand
        phi = cphi
        accept = caccept
        history[it] = phi
        if delta < tol:
            converged = True
            break
    return nu, phi, accept, it, converged, history[: it + 1]
