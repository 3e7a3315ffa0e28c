"""Seeded property suites that cross-check the solvers against the oracles."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import noma, oracles
from .balancer import DonorOverloadViolation, balance, init_association, init_bandwidth
from .partition import (build_surrogate, coordinate_lipschitz, power_value_grad_hess,
                        sca_optimize, solve_convex_subproblem, subproblem_objective)
from .report import Assignment, Evaluator, completion_times, feasibility_violations
from .scenario import ScenarioParams, generate_scenario
from .server_solver import MIDPOINT, optimize_server
from .workload import ServerProblem


@dataclass
class SuiteResult:
    name: str
    cases: int = 0
    failures: list[str] = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.cases > 0 and not self.failures

    def fail(self, msg: str) -> None:
        self.failures.append(msg)

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = "".join(f" {k}={v}" for k, v in self.notes.items())
        return f"{status} {self.name}: {self.cases} cases, {len(self.failures)} failures{extra}"


def random_uplink(rng: np.random.Generator, max_ues: int = 8):
    """Random uplink instance; positions come in no particular gain order."""
    n = int(rng.integers(1, max_ues + 1))
    gains = 10 ** rng.uniform(-9, -4, n)
    w = float(10 ** rng.uniform(5, 7.6))
    loads = rng.uniform(1e5, 2e8, n) * (rng.random(n) > 0.15)
    if not loads.any():
        loads[0] = 1e7
    p_max = rng.uniform(0.1, 0.25, n)
    return loads, gains, w, 1e-20, p_max


def random_server_problem(rng: np.random.Generator, n: int, w: float | None = None,
                          params: ScenarioParams | None = None) -> ServerProblem:
    seed = int(rng.integers(0, 2 ** 31))
    sc = generate_scenario(seed, 1, n, params)
    return ServerProblem.from_scenario(sc, 0, range(n), w or float(rng.uniform(2e6, 2e7)))


def suite_roundtrip(seeds: int = 1000, base: int = 0) -> SuiteResult:
    res = SuiteResult("roundtrip")
    worst = 0.0
    for s in range(seeds):
        rng = np.random.default_rng(base + s)
        loads, gains, w, n0, p_max = random_uplink(rng)
        T = noma.solve_min_upload_time(loads, gains, w, n0, p_max).upload_time
        T *= float(rng.uniform(0.8, 3.0))
        rep = oracles.roundtrip_check(loads, gains, w, n0, T)
        prod = oracles.product_form_powers(loads, gains, w, n0, T)
        closed = noma.min_powers_for_time(loads, gains, w, n0, T)
        worst = max(worst, rep.rel_error)
        res.cases += 1
        if not rep.passed:
            res.fail(f"seed {base + s}: round-trip rel error {rep.rel_error:.3e}")
        if not np.allclose(prod, closed, rtol=1e-9, atol=0):
            res.fail(f"seed {base + s}: closed-form powers differ from SINR recursion")
    res.notes["max_rel_error"] = f"{worst:.2e}"
    return res


def capacity_shape_check(loads, gains, w, n0, p_max, theta_star, samples: int = 64) -> str | None:
    """Capacity function increasing with one sign change, per loaded position."""
    for l in np.flatnonzero(loads > 0):
        grid = np.linspace(0.0, 4.0 * theta_star, samples)[1:]
        vals = np.array([noma.capacity_violation(t, l, loads, gains, w, n0, p_max[l])
                         for t in grid])
        if noma.capacity_violation(0.0, l, loads, gains, w, n0, p_max[l]) != -p_max[l]:
            return f"position {l}: F(0) != -p_max"
        finite = vals[np.isfinite(vals)]
        if np.any(np.diff(finite) <= 0):
            return f"position {l}: not strictly increasing"
        if np.count_nonzero(np.diff(np.sign(finite)) != 0) > 1:
            return f"position {l}: more than one sign change"
    return None


def suite_newton(seeds: int = 1000, base: int = 0) -> SuiteResult:
    res = SuiteResult("newton")
    worst = 0.0
    for s in range(seeds):
        rng = np.random.default_rng(base + s)
        loads, gains, w, n0, p_max = random_uplink(rng)
        sol = noma.solve_min_upload_time(loads, gains, w, n0, p_max)
        cum = np.cumsum(loads)
        roots = [oracles.capacity_root(cum[l] - loads[l], loads[l], gains[l], w, n0, p_max[l])
                 for l in np.flatnonzero(loads > 0)]
        ref = min(roots)
        rel = abs(sol.theta - ref) / ref
        worst = max(worst, rel)
        res.cases += 1
        if rel > 1e-8:
            res.fail(f"seed {base + s}: theta {sol.theta} vs oracle {ref} (rel {rel:.2e})")
        msg = capacity_shape_check(loads, gains, w, n0, p_max, sol.theta)
        if msg:
            res.fail(f"seed {base + s}: {msg}")
        if np.any(sol.powers > p_max + 1e-9):
            res.fail(f"seed {base + s}: power above cap at the optimum")
        b = sol.binding_position
        if abs(sol.powers[b] - p_max[b]) > 1e-6 * p_max[b]:
            res.fail(f"seed {base + s}: binding UE not at its cap")
    res.notes["max_rel_error"] = f"{worst:.2e}"
    return res


def subproblem_grid_oracle(problem: ServerProblem, surrogate, t_pm, t_ir):
    caps = surrogate.caps

    def objective(pts):
        t_lc = np.max(problem.intensity * (problem.data_size - pts) / problem.v_lc, axis=1)
        return np.maximum(t_lc, t_pm) + t_ir + pts @ problem.intensity / problem.v_srv

    def power(pts):
        d = pts - surrogate.x0
        val = (surrogate.values[None, :] + d @ surrogate.grads.T
               + 0.5 * np.einsum("kij,mi,mj->mk", surrogate.hess, d, d))
        return np.max(val / caps - 1.0, axis=1)

    box = list(zip(problem.lower, problem.data_size))
    return oracles.grid_search(objective, [power], box, 200, refine=3, shrink=0.1)


def suite_sca(seeds: int = 100, base: int = 0) -> SuiteResult:
    res = SuiteResult("sca")
    worst = 0.0
    for s in range(seeds):
        rng = np.random.default_rng(base + s)
        n = int(rng.integers(1, 5))
        prob = random_server_problem(rng, n)
        x0 = 0.5 * (prob.lower + prob.data_size)
        sched = prob.schedule(x0)
        st = sca_optimize(prob, sched.t_pm, sched.t_ir, x0)
        res.cases += 1
        if np.any(np.diff(st.trace) > 1e-9):
            res.fail(f"seed {base + s}: SCA trace increased")
        if n == 2:
            sur = build_surrogate(prob, x0, sched.t_pm, sched.t_ir)
            x = solve_convex_subproblem(prob, sur, sched.t_pm, sched.t_ir)
            got = subproblem_objective(prob, x, sched.t_pm, sched.t_ir)
            _, ref = subproblem_grid_oracle(prob, sur, sched.t_pm, sched.t_ir)
            rel = (got - ref) / ref
            worst = max(worst, abs(rel))
            if rel > 1e-3:
                res.fail(f"seed {base + s}: subproblem {got} vs grid {ref}")
    res.notes["max_grid_gap"] = f"{worst:.2e}"
    return res


def suite_server(seeds: int = 100, base: int = 0) -> SuiteResult:
    res = SuiteResult("server")
    worst = 0.0
    for s in range(seeds):
        rng = np.random.default_rng(base + s)
        n = int(rng.integers(1, 6))
        prob = random_server_problem(rng, n)
        for start in ("curve", MIDPOINT):
            sol = optimize_server(prob, start=start)
            res.cases += 1
            if np.any(np.diff(sol.trace) > 1e-9):
                res.fail(f"seed {base + s}: BCD trace increased ({start})")
            again = prob.schedule(sol.d_off)
            if not math.isclose(again.t_ttl, sol.t_ttl, rel_tol=1e-9):
                res.fail(f"seed {base + s}: stored schedule not reproducible")
        if n <= 2 and s < 20:
            _, ref = oracles.server_time_grid(prob)
            sol = optimize_server(prob)
            gap = sol.t_ttl / ref - 1
            worst = max(worst, gap)
            if gap > 0.02:
                res.fail(f"seed {base + s}: {sol.t_ttl} vs joint oracle {ref}")
    res.notes["max_oracle_gap"] = f"{worst:.2e}"
    return res


def suite_balance(seeds: int = 100, base: int = 0, epsilon: float = 0.5) -> SuiteResult:
    res = SuiteResult("balance")
    donor_checks = 0
    for s in range(seeds):
        rng = np.random.default_rng(base + s)
        I = int(rng.integers(1, 4))
        N = int(rng.integers(I, 10))
        sc = generate_scenario(base + s, I, N)
        try:
            rep = balance(sc, epsilon=epsilon, check=True)
        except (AssertionError, DonorOverloadViolation) as exc:
            res.fail(f"seed {base + s}: {exc}")
            continue
        res.cases += 1
        donor_checks += rep.stats["donor_checks"]
        if rep.makespan > rep.trace[0]["makespan"] + 1e-12:
            res.fail(f"seed {base + s}: final makespan above initial")
        if rep.iterations > 100:
            res.fail(f"seed {base + s}: exceeded iteration budget")
        bad = feasibility_violations(sc, rep)
        if bad:
            res.fail(f"seed {base + s}: {bad[0]}")
    res.notes["donor_checks"] = donor_checks
    return res


def suite_lemmas(seeds: int = 100, base: int = 0) -> SuiteResult:
    res = SuiteResult("lemmas")
    chord_fails = 0
    for s in range(seeds):
        rng = np.random.default_rng(base + s)
        loads, gains, w, n0, p_max = random_uplink(rng, 4)
        sol = noma.solve_min_upload_time(loads, gains, w, n0, p_max)
        res.cases += 1
        msg = capacity_shape_check(loads, gains, w, n0, p_max, sol.theta)
        if msg:
            res.fail(f"seed {base + s}: capacity function {msg}")
        # derivative bounds on the own-load derivative, other loads held fixed
        l = int(rng.integers(0, len(loads)))
        upper = 2e8
        T = sol.upload_time
        secant, sup = coordinate_lipschitz(loads, l, gains, w, n0, T, upper)
        sigma = w * n0 / gains[l]
        la = noma.LN2 / (T * w)
        prior = float(np.sum(loads[:l]))

        def H(x):
            return sigma * la * np.exp(la * (prior + x))

        xs = rng.uniform(0, upper, (50, 2))
        dH = np.abs(H(xs[:, 0]) - H(xs[:, 1]))
        dx = np.abs(xs[:, 0] - xs[:, 1])
        if np.any(dH > sup * dx * (1 + 1e-9)):
            res.fail(f"seed {base + s}: derivative bound sup|H'| violated")
        if np.any(dH > (H(upper) - H(0.0)) * (1 + 1e-12)):
            res.fail(f"seed {base + s}: range bound violated")
        chord_fails += bool(np.any(dH > secant * dx * (1 + 1e-12)))
    # donor overload and the per-server decomposition, on balancer runs
    for s in range(max(1, seeds // 5)):
        sc = generate_scenario(base + s, 3, 9)
        ev = Evaluator(sc)
        try:
            rep = balance(sc, epsilon=0.05, check=True, evaluator=ev)
        except DonorOverloadViolation as exc:
            res.fail(f"seed {base + s}: donor check {exc}")
            continue
        res.cases += 1
        A = init_association(sc)
        a = Assignment(A, init_bandwidth(A, sc.n_servers, sc.bandwidth))
        sols = ev.evaluate(a)
        independent = [optimize_server(ServerProblem.from_scenario(sc, i, g, a.bandwidth[i]))
                       for i, g in enumerate(a.groups(sc.n_servers))]
        if completion_times(sols).max() != max(x.t_ttl for x in independent):
            res.fail(f"seed {base + s}: decomposition mismatch")
    res.notes["chord_slope_failures"] = chord_fails
    return res


SUITES: dict[str, Callable[..., SuiteResult]] = {
    "roundtrip": suite_roundtrip,
    "newton": suite_newton,
    "sca": suite_sca,
    "server": suite_server,
    "balance": suite_balance,
    "lemmas": suite_lemmas,
}


def run_suite(name: str, seeds: int | None = None) -> SuiteResult:
    if name not in SUITES:
        raise KeyError(name)
    fn = SUITES[name]
    return fn() if seeds is None else fn(seeds)
