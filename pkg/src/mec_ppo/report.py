"""Assignments, cached per-server evaluation and solution reports."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import noma
from .scenario import Scenario, TDMA
from .server_solver import ServerSolution, optimize_server
from .timing import (OffloadDecision, ServerSchedule, local_energy, system_makespan,
                     uploaded_intermediate)
from .workload import ServerProblem


@dataclass
class Assignment:
    association: list[int]  # server index per UE
    bandwidth: np.ndarray  # Hz per server

    def copy(self) -> "Assignment":
        return Assignment(list(self.association), self.bandwidth.copy())

    def groups(self, n_servers: int) -> list[tuple[int, ...]]:
        out: list[list[int]] = [[] for _ in range(n_servers)]
        for ue, srv in enumerate(self.association):
            out[srv].append(ue)
        return [tuple(g) for g in out]

    def key(self) -> tuple:
        return tuple(self.association), tuple(map(float, self.bandwidth))

    def check(self, scenario: Scenario, atol: float = 1e-9) -> None:
        """Raise if the assignment breaks conservation or association rules."""
        if len(self.association) != scenario.n_ues:
            raise AssertionError("every UE needs exactly one server")
        if any(not 0 <= s < scenario.n_servers for s in self.association):
            raise AssertionError("association refers to an unknown server")
        if len(self.bandwidth) != scenario.n_servers or np.any(self.bandwidth < 0):
            raise AssertionError("bandwidth vector malformed or negative")
        if abs(float(self.bandwidth.sum()) - scenario.bandwidth) > atol * scenario.bandwidth:
            raise AssertionError("bandwidth not conserved")
        for srv, g in enumerate(self.groups(scenario.n_servers)):
            if g and self.bandwidth[srv] <= 0:
                raise AssertionError(f"server {srv} hosts UEs without bandwidth")

    def to_dict(self) -> dict:
        return {"association": list(self.association),
                "bandwidth": [float(w) for w in self.bandwidth]}


Solver = Callable[[ServerProblem, "np.ndarray | None"], ServerSolution]


def ppo_solver(**kwargs) -> Solver:
    def solve(problem, hint=None):
        return optimize_server(problem, hints=hint, **kwargs)
    return solve


class Evaluator:
    """Solves servers for an assignment, caching by (server, group, bandwidth)."""

    def __init__(self, scenario: Scenario, solver: Solver | None = None,
                 access: str | None = None):
        self.scenario = scenario
        self.access = access or scenario.access_mode
        self.solver = solver or ppo_solver()
        self.cache: dict[tuple, ServerSolution] = {}
        self.solves = 0

    def solve(self, server: int, group: Sequence[int], bandwidth: float,
              hint=None) -> ServerSolution:
        group = tuple(sorted(group))
        key = (server, group, float(bandwidth)) if group else (server, ())
        sol = self.cache.get(key)
        if sol is None:
            problem = ServerProblem.from_scenario(self.scenario, server, group,
                                                  bandwidth, self.access)
            sol = self.solver(problem, hint)
            self.cache[key] = sol
            self.solves += 1
        return sol

    def evaluate(self, assignment: Assignment) -> list[ServerSolution]:
        groups = assignment.groups(self.scenario.n_servers)
        return [self.solve(i, g, assignment.bandwidth[i]) for i, g in enumerate(groups)]


def completion_times(solutions: Sequence[ServerSolution]) -> np.ndarray:
    return np.array([s.t_ttl for s in solutions])


@dataclass
class SolutionReport:
    method: str
    access: str
    makespan: float
    assignment: Assignment
    schedules: list[ServerSchedule]
    decisions: list[OffloadDecision]
    trace: list[dict] = field(default_factory=list)
    seed: int | None = None
    iterations: int = 0
    stats: dict = field(default_factory=dict)

    @property
    def phi(self) -> float:
        t = [s.t_ttl for s in self.schedules]
        return max(t) - min(t)

    def offloads(self) -> np.ndarray:
        return np.array([d.d_off for d in self.decisions])

    def to_dict(self) -> dict:
        return {
            "method": self.method, "access": self.access, "seed": self.seed,
            "makespan_s": self.makespan, "phi_s": self.phi,
            "iterations": self.iterations,
            "assignment": self.assignment.to_dict(),
            "schedules": [s.to_dict() for s in self.schedules],
            "decisions": [{"ue_id": d.ue_id, "d_off": d.d_off, "s": d.s}
                          for d in self.decisions],
            "trace": self.trace,
            "stats": self.stats,
        }


def build_report(method: str, scenario: Scenario, assignment: Assignment,
                 solutions: Sequence[ServerSolution], access: str | None = None,
                 trace=None, iterations: int = 0) -> SolutionReport:
    schedules = [s.schedule for s in solutions]
    d_off = np.zeros(scenario.n_ues)
    for sol in solutions:
        for ue, x in sol.offloads().items():
            d_off[ue] = x
    decisions = []
    for ue in scenario.ues:
        x = float(d_off[ue.id])
        s = float(uploaded_intermediate(ue.program.k, ue.program.b, x))
        decisions.append(OffloadDecision(ue.id, x, s))
    return SolutionReport(method, access or scenario.access_mode,
                          system_makespan(schedules), assignment.copy(), schedules,
                          decisions, list(trace or []), scenario.seed, iterations)


def feasibility_violations(scenario: Scenario, report: SolutionReport,
                           tol: float = 1e-6) -> list[str]:
    """Re-check caps, energy and box from scratch; empty list means feasible.

    Powers are recomputed from the stored upload durations, so they do not
    rely on the solver's own bookkeeping. Reports flagged with
    ``stats["program_on_server"]`` skip the program upload check.
    """
    out = []
    report.assignment.check(scenario)
    groups = report.assignment.groups(scenario.n_servers)
    for ue, dec in zip(scenario.ues, report.decisions):
        D = ue.program.data_size
        if not -tol * D <= dec.d_off <= D * (1 + tol):
            out.append(f"UE {ue.id}: offload {dec.d_off} outside [0, {D}]")
        x = min(max(dec.d_off, 0.0), D)
        if local_energy(ue, x) > ue.energy_budget * (1 + tol) + tol:
            out.append(f"UE {ue.id}: energy {local_energy(ue, x)} > {ue.energy_budget}")
    for srv, (group, sched) in enumerate(zip(groups, report.schedules)):
        if not group:
            continue
        w = float(report.assignment.bandwidth[srv])
        order = noma.decode_order(group, [scenario.gains[srv][n] for n in group],
                                  [scenario.ues[n].max_power for n in group])
        ids = [group[j] for j in order]
        gains = np.array([scenario.gains[srv][n] for n in ids])
        caps = np.array([scenario.ues[n].max_power for n in ids])
        x = np.array([report.decisions[n].d_off for n in ids])
        s = np.array([report.decisions[n].s for n in ids])
        for label, loads, T in (("program", x, sched.t_pm), ("intermediate", s, sched.t_ir)):
            if not np.any(loads > 0):
                continue
            if label == "program" and report.stats.get("program_on_server"):
                continue
            if report.access == TDMA:
                need = float(noma.tdma_upload_times(loads, gains, w, scenario.noise_density,
                                                    caps)[0])
                if need > T * (1 + tol):
                    out.append(f"server {srv}: {label} TDMA slices need {need} > {T}")
                continue
            if T <= 0:
                out.append(f"server {srv}: {label} load with zero upload time")
                continue
            p = noma.min_powers_for_time(loads, gains, w, scenario.noise_density, T)
            if np.any(p > caps * (1 + tol)):
                out.append(f"server {srv}: {label} power above cap")
    return out
