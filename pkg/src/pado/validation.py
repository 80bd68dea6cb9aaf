"""Fuzzed comparisons of the policy code against the brute-force oracles."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import oracle
from .game import run_horizon
from .model import SimParams
from .server_policy import dual_value, solve_offer
from .vehicle_policy import BidSet, best_response, local_price, p2_value

SUITES = ("p2", "server", "battery")
PHI_RTOL = 1e-3
ITER_SHARE = 0.95


@dataclass
class SuiteResult:
    suite: str
    n: int
    passed: bool
    failures: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)
    warning: str = ""

    def as_dict(self) -> dict:
        return dict(suite=self.suite, n=self.n, passed=self.passed, failures=self.failures[:20],
                    n_failures=len(self.failures), stats=self.stats, warning=self.warning)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        extra = ", ".join(f"{k}={v:.3g}" if isinstance(v, float) else f"{k}={v}" for k, v in self.stats.items())
        return f"[{tag}] {self.suite}: n={self.n} failures={len(self.failures)} {extra} {self.warning}".rstrip()


# ------------------------------------------------------------------ fuzzing


def fuzz_p2_state(rng: np.random.Generator, params: SimParams) -> dict:
    """A follower decision problem with a log-uniform weight and a mix of finite and missing offers."""
    weight = float(10 ** rng.uniform(8, 11))
    units = rng.uniform(params.size_min_units, params.size_max_units)
    workload = units * params.bits_per_unit * params.cycles_per_bit
    slack = float(rng.uniform(-params.gamma[-1], 3 * params.gamma[-1]))
    psi_off = np.inf if rng.random() < 0.25 else float(rng.uniform(0, 2 * params.drop_price))
    return dict(slack=slack, workload=float(workload), f_max=float(params.f_local_max[0]), psi_off=psi_off,
                weight=weight)


def fuzz_server_instance(rng: np.random.Generator, params: SimParams, max_vehicles: int = 2):
    """Bids from vehicles that best-responded to random offers, plus a random battery offset."""
    n = int(rng.integers(1, max_vehicles + 1))
    units = rng.uniform(params.size_min_units, params.size_max_units, n)
    workload = units * params.bits_per_unit * params.cycles_per_bit
    slack = rng.uniform(-0.01, 0.05, n)
    f, _, _, _ = best_response(slack, workload, params.f_local_max[0], rng.uniform(0, 2 * params.drop_price, n),
                               params)
    psi_loc = local_price(slack, f, params.vehicle_weight, params.kappa)
    demand = rng.uniform(params.demand_min, params.demand_max, (n, params.n_resources))
    bids = BidSet(np.arange(n), workload, demand, f, slack, psi_loc, np.full(n, params.drop_price))
    return bids, float(rng.uniform(-50, 50))


# ------------------------------------------------------------------- suites


def check_p2(n: int, params: SimParams, seed: int = 0) -> SuiteResult:
    rng = np.random.default_rng(seed)
    res = SuiteResult("p2", n, True)
    worst = 0.0
    for k in range(n):
        s = fuzz_p2_state(rng, params)
        p = params.replace(vehicle_weight=s["weight"])
        f, a, b, _ = best_response(s["slack"], s["workload"], s["f_max"], s["psi_off"], p)
        got = float(p2_value(s["slack"], s["workload"], a[0], b[0], f[0], s["psi_off"], p.vehicle_weight, p.kappa,
                             p.drop_price, p.energy_term))
        ba, bb, bf, bv = oracle.brute_force_p2(s["slack"], s["workload"], s["f_max"], s["psi_off"], p)
        bound = max(oracle.p2_grid_slack(s["slack"], s["workload"], bf, s["psi_off"], p),
                    oracle.p2_grid_slack(s["slack"], s["workload"], f[0], s["psi_off"], p))
        excess = got - bv
        worst = max(worst, excess / bound if bound > 0 else 0.0)
        if excess > bound + 1e-12 * abs(bv):
            res.failures.append(dict(instance=k, **s, value=got, brute=bv, bound=bound))
    res.passed = not res.failures
    res.stats = dict(worst_excess_over_bound=worst)
    return res


def check_server(n: int, params: SimParams, seed: int = 0, max_vehicles: int = 2) -> SuiteResult:
    rng = np.random.default_rng(seed)
    res = SuiteResult("server", n, True)
    cap = np.asarray(params.capacity, dtype=float)
    within, worst = 0, 0.0
    for k in range(n):
        bids, tilde = fuzz_server_instance(rng, params, max_vehicles)
        offer = solve_offer(bids, tilde, None, params)
        phi, _ = dual_value(offer.service, bids.demand, offer.nu, cap)
        ref = oracle.brute_force_server(bids, tilde, offer.nu, params)
        rel = abs(phi - ref.phi) / max(abs(ref.phi), 1e-300)
        worst = max(worst, rel)
        within += offer.iterations <= params.dual_max_iter and offer.converged
        if rel > PHI_RTOL:
            res.failures.append(dict(instance=k, phi=phi, oracle=ref.phi, rel=rel))
    share = within / n if n else 1.0
    res.passed = not res.failures and share >= ITER_SHARE
    res.stats = dict(worst_rel=worst, converged_share=share)
    return res


def check_battery(params: SimParams, n_slots=None) -> SuiteResult:
    series = run_horizon(params, n_slots)
    rep = oracle.battery_bound_check(series.column("battery"), series.column("price"), series.theta, params)
    res = SuiteResult("battery", len(series), rep.ok, failures=rep.violations)
    b = series.column("battery")
    res.stats = dict(battery_min=float(b.min()) if len(b) else 0.0, battery_max=float(b.max()) if len(b) else 0.0)
    return res


def run_suites(suite: str, n: int, params: SimParams, seed: int = 0):
    names = SUITES if suite == "all" else (suite,)
    out = []
    for name in names:
        if n == 0:
            out.append(SuiteResult(name, 0, True, warning="no instances requested; nothing checked"))
        elif name == "p2":
            out.append(check_p2(n, params, seed))
        elif name == "server":
            out.append(check_server(n, params, seed))
        else:
            out.append(check_battery(params))
    return out
