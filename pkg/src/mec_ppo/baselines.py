"""Comparison methods: fixed-ratio offloading, channel-gain association with
fixed or workload-weighted bandwidth, exhaustive search and a genetic search."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .balancer import balance, init_association, init_bandwidth
from .report import (Assignment, Evaluator, SolutionReport, build_report,
                     completion_times)
from .scenario import NOMA, TDMA, Scenario
from .server_solver import ServerSolution
from .timing import ServerSchedule
from .workload import ServerProblem

METHODS = ("ppo", "fpo", "hpo", "zpo", "preinstalled", "cg_fba", "cg_vba", "es", "ga")
FIXED_RATIOS = {"fpo": 1.0, "hpo": 0.5, "zpo": 0.0}
ES_LIMIT = 10 ** 6
ES_GRID = 21


class InstanceTooLarge(ValueError):
    """Exhaustive search would exceed its enumeration budget."""


@dataclass(frozen=True)
class MethodSpec:
    tag: str = "ppo"
    access: str = NOMA
    epsilon: float = 5.0
    max_iter: int = 100
    population: int = 20
    iterations: int = 500
    ga_seed: int = 0
    es_grid: int = ES_GRID

    def __post_init__(self):
        if self.tag not in METHODS:
            raise ValueError(f"unknown method {self.tag!r}; expected one of {METHODS}")
        if self.access not in (NOMA, TDMA):
            raise ValueError(f"unknown access mode {self.access!r}")


def fixed_ratio_solver(ratio: float, preinstalled: bool = False):
    """Per-server evaluation with ``x = max(ratio * D, energy floor)`` and no optimisation.

    ``preinstalled`` drops the program upload (the code is already on the server).
    """
    if not 0.0 <= ratio <= 1.0:
        raise ValueError("ratio must lie in [0, 1]")

    def solve(problem: ServerProblem, hint=None) -> ServerSolution:
        if problem.n == 0:
            return ServerSolution(np.zeros(0), 0.0, 0.0, ServerSchedule.empty())
        x = np.maximum(ratio * problem.data_size, problem.lower)
        s = problem.schedule(x)
        if preinstalled:
            s = ServerSchedule(s.t_lc, 0.0, s.t_ir, s.t_srv, s.t_lc + s.t_ir + s.t_srv,
                               s.ue_ids, tuple(0.0 for _ in s.p_pm), s.p_ir)
        return ServerSolution(x, s.t_pm, s.t_ir, s, 0, [s.t_ttl])

    return solve


def _initial(scenario: Scenario) -> Assignment:
    A = init_association(scenario)
    return Assignment(A, init_bandwidth(A, scenario.n_servers, scenario.bandwidth))


def run_fixed_ratio(scenario: Scenario, ratio: float, access: str | None = None,
                    preinstalled: bool = False, method: str | None = None) -> SolutionReport:
    ev = Evaluator(scenario, fixed_ratio_solver(ratio, preinstalled), access)
    a = _initial(scenario)
    label = method or {1.0: "fpo", 0.5: "hpo", 0.0: "zpo"}.get(ratio, f"ratio_{ratio}")
    rep = build_report(label, scenario, a, ev.evaluate(a), ev.access)
    if preinstalled:
        rep.stats["program_on_server"] = True
    return rep


def preinstalled(scenario: Scenario, access: str | None = None) -> SolutionReport:
    return run_fixed_ratio(scenario, 1.0, access, preinstalled=True, method="preinstalled")


def equal_bandwidth(association, n_servers: int, total: float) -> np.ndarray:
    used = np.bincount(np.asarray(association, dtype=int), minlength=n_servers) > 0
    return np.where(used, total / used.sum(), 0.0)


def run_cg(scenario: Scenario, variable_bandwidth: bool = False,
           access: str | None = None, evaluator: Evaluator | None = None) -> SolutionReport:
    """Best-channel association without migration.

    Fixed allocation splits bandwidth evenly over servers that host UEs. The
    variable variant then re-splits it in proportion to each server's offloaded
    cycles and solves once more.
    """
    ev = evaluator or Evaluator(scenario, access=access)
    A = init_association(scenario)
    a = Assignment(A, equal_bandwidth(A, scenario.n_servers, scenario.bandwidth))
    sols = ev.evaluate(a)
    if variable_bandwidth:
        load = np.array([sum(scenario.ues[n].program.intensity * x
                             for n, x in s.offloads().items()) for s in sols])
        if load.sum() > 0 and np.all(load[a.bandwidth > 0] > 0):
            a = Assignment(A, scenario.bandwidth * load / load.sum())
            sols = ev.evaluate(a)
    return build_report("cg_vba" if variable_bandwidth else "cg_fba", scenario, a, sols,
                        ev.access)


def compositions(total: int, parts: int) -> Iterable[tuple[int, ...]]:
    """All ways to write ``total`` as an ordered sum of ``parts`` positive integers."""
    for cuts in itertools.combinations(range(1, total), parts - 1):
        bounds = (0,) + cuts + (total,)
        yield tuple(b - a for a, b in zip(bounds, bounds[1:]))


def _best_split(ev: Evaluator, groups, used: Sequence[int], total: float,
                grid: int) -> tuple[float, np.ndarray, list[ServerSolution]]:
    n_srv = len(groups)
    steps = grid - 1

    def split(parts):
        w = np.zeros(n_srv)
        for i, p in zip(used, parts):
            w[i] = total * p / steps
        return w

    def run(w):
        sols = [ev.solve(i, groups[i], w[i]) for i in range(n_srv)]
        return float(completion_times(sols).max()), w, sols

    if len(used) == 1:
        w = np.zeros(n_srv)
        w[used[0]] = total
        return run(w)
    if len(used) == 2:
        # the first server speeds up and the second slows down as its share grows:
        # bisect for the crossing, then compare the two lattice points around it
        a, b = used
        lo, hi = 1, steps - 1

        def times(k):
            w = split((k, steps - k))
            return ev.solve(a, groups[a], w[a]).t_ttl, ev.solve(b, groups[b], w[b]).t_ttl

        while lo < hi:
            mid = (lo + hi) // 2
            ta, tb = times(mid)
            if ta > tb:
                lo = mid + 1
            else:
                hi = mid
        cands = [k for k in (lo - 1, lo) if 1 <= k <= steps - 1]
        return min((run(split((k, steps - k))) for k in cands), key=lambda r: r[0])
    return min((run(split(parts)) for parts in compositions(steps, len(used))),
               key=lambda r: r[0])


def exhaustive_search(scenario: Scenario, access: str | None = None,
                      grid: int = ES_GRID, evaluator: Evaluator | None = None,
                      extra_candidates: Sequence[Assignment] = ()) -> SolutionReport:
    """Minimum makespan over every association and a bandwidth lattice.

    The lattice splits the bandwidth into ``grid - 1`` equal steps among the
    servers that host UEs (each gets at least one step). ``extra_candidates``
    are evaluated too, which makes the result dominate any method whose
    assignment is passed in.
    """
    I, N = scenario.n_servers, scenario.n_ues
    if I ** N > ES_LIMIT:
        raise InstanceTooLarge(f"{I}^{N} associations exceed the limit of {ES_LIMIT}")
    if grid < 2:
        raise ValueError("grid must be >= 2")
    ev = evaluator or Evaluator(scenario, access=access)
    best = (math.inf, None, None)
    for assoc in itertools.product(range(I), repeat=N):
        a = Assignment(list(assoc), np.zeros(I))
        groups = a.groups(I)
        used = [i for i in range(I) if groups[i]]
        if len(used) > grid - 1:
            continue
        g, w, sols = _best_split(ev, groups, used, scenario.bandwidth, grid)
        if g < best[0]:
            best = (g, Assignment(list(assoc), w), sols)
    for cand in extra_candidates:
        sols = ev.evaluate(cand)
        g = float(completion_times(sols).max())
        if g < best[0]:
            best = (g, cand.copy(), sols)
    report = build_report("es", scenario, best[1], best[2], ev.access)
    report.stats = {"associations": I ** N, "solves": ev.solves}
    return report


def genetic_search(scenario: Scenario, population: int = 20, iterations: int = 500,
                   seed: int = 0, access: str | None = None,
                   evaluator: Evaluator | None = None,
                   checkpoints: Sequence[int] = ()) -> SolutionReport:
    """Elitist GA over association vectors with proportional bandwidth.

    Binary tournaments, one-point crossover and per-gene mutation with rate
    1/N. ``checkpoints`` records the best fitness after those generations in
    ``report.stats``, so one long run also yields shorter-run results.
    """
    if population < 2:
        raise ValueError("population must be >= 2")
    I, N = scenario.n_servers, scenario.n_ues
    ev = evaluator or Evaluator(scenario, access=access)
    rng = np.random.default_rng(seed)
    fitness_cache: dict[tuple, tuple[float, Assignment, list]] = {}

    def fitness(genes) -> float:
        key = tuple(int(g) for g in genes)
        hit = fitness_cache.get(key)
        if hit is None:
            a = Assignment(list(key), init_bandwidth(key, I, scenario.bandwidth))
            sols = ev.evaluate(a)
            hit = (float(completion_times(sols).max()), a, sols)
            fitness_cache[key] = hit
        return hit[0]

    pop = rng.integers(0, I, size=(population, N))
    pop[0] = init_association(scenario)
    fit = np.array([fitness(p) for p in pop])
    history = {}
    for gen in range(1, iterations + 1):
        elite = pop[int(np.argmin(fit))].copy()
        children = [elite]
        while len(children) < population:
            parents = []
            for _ in range(2):
                i, j = rng.integers(0, population, size=2)
                parents.append(pop[i] if fit[i] <= fit[j] else pop[j])
            cut = int(rng.integers(1, N)) if N > 1 else 0
            child = np.concatenate([parents[0][:cut], parents[1][cut:]])
            flip = rng.random(N) < 1.0 / N
            child[flip] = rng.integers(0, I, size=int(flip.sum()))
            children.append(child)
        pop = np.array(children)
        fit = np.array([fitness(p) for p in pop])
        if gen in checkpoints:
            history[gen] = float(fit.min())
    key = tuple(int(g) for g in pop[int(np.argmin(fit))])
    g, a, sols = fitness_cache[key]
    report = build_report("ga", scenario, a, sols, ev.access, iterations=iterations)
    report.stats = {"checkpoints": history, "distinct_individuals": len(fitness_cache)}
    return report


def run_method(scenario: Scenario, spec: MethodSpec) -> SolutionReport:
    """Dispatch a method tag to its implementation."""
    if scenario.access_mode != spec.access:
        scenario = scenario.with_access(spec.access)
    tag = spec.tag
    if tag == "ppo":
        return balance(scenario, spec.epsilon, spec.max_iter)
    if tag in FIXED_RATIOS:
        return run_fixed_ratio(scenario, FIXED_RATIOS[tag], method=tag)
    if tag == "preinstalled":
        return preinstalled(scenario)
    if tag in ("cg_fba", "cg_vba"):
        return run_cg(scenario, tag == "cg_vba")
    if tag == "es":
        return exhaustive_search(scenario, grid=spec.es_grid)
    return genetic_search(scenario, spec.population, spec.iterations, spec.ga_seed)
