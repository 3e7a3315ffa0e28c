"""Joint association and bandwidth balancing across servers.

Starting from best-channel association and a UE-proportional bandwidth split,
the balancer repeatedly moves one UE from the slowest server to the fastest,
and falls back to shifting bandwidth from the fastest to the slowest when a
move does not shorten the makespan. Failed bandwidth shifts are undone and
retried with half the amount.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .report import (Assignment, Evaluator, SolutionReport, build_report,
                     completion_times)
from .scenario import Scenario

log = logging.getLogger(__name__)

MIGRATE = "migrate"
BANDWIDTH = "bandwidth"
BACKTRACK = "backtrack"

DEFAULT_EPSILON = 5.0
DEFAULT_MAX_ITER = 100
MIN_TRANSFER_HZ = 1e3


def init_association(scenario: Scenario) -> list[int]:
    """Each UE joins the server it hears best; ties go to the lowest index."""
    g = scenario.gain_matrix
    return [int(np.argmax(g[:, n])) for n in range(scenario.n_ues)]


def init_bandwidth(association, n_servers: int, total: float) -> np.ndarray:
    counts = np.bincount(np.asarray(association, dtype=int), minlength=n_servers)
    if counts.sum() < 1:
        raise ValueError("need at least one associated UE")
    return total * counts / counts.sum()


def spread(times) -> float:
    t = np.asarray(times, dtype=float)
    return float(t.max() - t.min())


def select_migration_ue(association, gains, src: int, dst: int) -> int | None:
    """UE of ``src`` with the best gain to ``dst``; None when ``src`` has at most one UE."""
    members = [n for n, s in enumerate(association) if s == src]
    if len(members) <= 1:
        return None
    g = np.asarray(gains, dtype=float)
    return min(members, key=lambda n: (-g[dst, n], n))


def transfer_bandwidth(w, receiver: int, donor: int, amount: float) -> np.ndarray:
    """Move ``amount`` Hz from ``donor`` to ``receiver``."""
    w = np.array(w, dtype=float)
    if not 0 < amount < w[donor]:
        raise ValueError(f"transfer {amount} must lie in (0, {w[donor]})")
    w[receiver] += amount
    w[donor] -= amount
    return w


def initial_transfer(w, donor: int, donor_size: int) -> float:
    return float(w[donor]) / (donor_size + 1)


def _extremes(times) -> tuple[int, int]:
    t = np.asarray(times)
    return int(np.argmax(t)), int(np.argmin(t))


@dataclass
class BalanceTrace:
    steps: list[dict] = field(default_factory=list)
    donor_checks: int = 0

    def add(self, **entry) -> None:
        self.steps.append(entry)


class DonorOverloadViolation(AssertionError):
    """A rejected bandwidth shift did not overload the donor server."""


def balance(scenario: Scenario, epsilon: float = DEFAULT_EPSILON,
            max_iter: int = DEFAULT_MAX_ITER, evaluator: Evaluator | None = None,
            check: bool = False, method: str = "ppo",
            carry_bandwidth: bool = True) -> SolutionReport:
    """Run the migrate / shift-bandwidth case machine and report the best state seen.

    With ``check=True`` every action re-validates the assignment and each
    rejected bandwidth shift asserts that the donor now exceeds the previous
    makespan.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    ev = evaluator or Evaluator(scenario)
    I = scenario.n_servers
    gains = scenario.gain_matrix

    A = init_association(scenario)
    cur = Assignment(A, init_bandwidth(A, I, scenario.bandwidth))
    sols = ev.evaluate(cur)
    T = completion_times(sols)
    gamma = float(T.max())
    trace = BalanceTrace()
    trace.add(iteration=0, action="init", makespan=gamma, phi=spread(T),
              slow=_extremes(T)[0], fast=_extremes(T)[1], transfer_hz=None)
    best = (gamma, cur.copy(), sols)

    mode = MIGRATE
    amount = None
    it = 0
    halvings = 0
    while it < max_iter and spread(T) > epsilon:
        slow, fast = _extremes(T)
        groups = cur.groups(I)
        if mode == MIGRATE:
            ue = select_migration_ue(cur.association, gains, slow, fast)
            if ue is None:
                mode, amount = BANDWIDTH, None
                continue
            it += 1
            nxt = cur.copy()
            nxt.association[ue] = fast
            if carry_bandwidth or nxt.bandwidth[fast] <= 0:
                share = nxt.bandwidth[slow] / len(groups[slow])
                nxt.bandwidth[slow] -= share
                nxt.bandwidth[fast] += share
        else:
            donors = [i for i in range(I) if cur.bandwidth[i] > 0 and i != slow]
            if not donors:
                break
            fast = min(donors, key=lambda i: (T[i], i))
            if amount is None:
                amount = initial_transfer(cur.bandwidth, fast, len(groups[fast]))
                it += 1
            if amount < MIN_TRANSFER_HZ:
                break
            nxt = cur.copy()
            nxt.bandwidth = transfer_bandwidth(cur.bandwidth, slow, fast, amount)

        if check:
            nxt.check(scenario)
        ngroups = nxt.groups(I)
        nsols = list(sols)
        for i in (slow, fast):
            hint = sols[i].d_off if ngroups[i] == groups[i] and len(groups[i]) else None
            nsols[i] = ev.solve(i, ngroups[i], nxt.bandwidth[i], hint)
        nT = completion_times(nsols)
        ngamma = float(nT.max())
        theta = gamma - ngamma

        if theta > 0:
            cur, sols, T, gamma = nxt, nsols, nT, ngamma
            if gamma < best[0]:
                best = (gamma, cur.copy(), sols)
            trace.add(iteration=it, action=mode, makespan=gamma, phi=spread(T),
                      slow=slow, fast=fast, transfer_hz=amount if mode == BANDWIDTH else None)
            if mode == BANDWIDTH:
                mode, amount = MIGRATE, None
            continue

        trace.add(iteration=it, action=BACKTRACK, makespan=ngamma, phi=spread(nT),
                  slow=slow, fast=fast, transfer_hz=amount if mode == BANDWIDTH else None,
                  rejected=mode)
        if mode == MIGRATE:
            mode, amount = BANDWIDTH, None
        else:
            if check and theta < -1e-9:
                trace.donor_checks += 1
                if not nT[fast] > gamma - 1e-9:
                    raise DonorOverloadViolation(
                        f"donor {fast} at {nT[fast]} s does not exceed makespan {gamma} s")
            amount *= 0.5
            halvings += 1

    g, A_best, s_best = best
    report = build_report(method, scenario, A_best, s_best, ev.access,
                          trace.steps, iterations=it)
    report.stats = {"halvings": halvings, "donor_checks": trace.donor_checks,
                    "solves": ev.solves}
    return report
