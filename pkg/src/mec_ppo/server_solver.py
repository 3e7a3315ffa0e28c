"""Per-server solve: alternate the two upload-time solves with the partition step."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .partition import sca_optimize
from .scenario import TDMA
from .timing import ServerSchedule
from .workload import ServerProblem

CURVE = "curve"
MIDPOINT = "midpoint"

_COARSE = 65
_FINE = 17
_ROUNDS = 8
_SEEDS = 3  # coarse minima refined independently


@dataclass
class ServerSolution:
    d_off: np.ndarray  # decode order, aligned with schedule.ue_ids
    t_pm: float
    t_ir: float
    schedule: ServerSchedule
    iterations: int = 0
    trace: list[float] = field(default_factory=list)

    @property
    def t_ttl(self) -> float:
        return self.schedule.t_ttl

    def offloads(self) -> dict[int, float]:
        return dict(zip(self.schedule.ue_ids, map(float, self.d_off)))


def midpoint_start(problem: ServerProblem) -> np.ndarray:
    return 0.5 * (problem.lower + problem.data_size)


def curve_points(problem: ServerProblem, finish_times) -> np.ndarray:
    """Smallest offloads that finish local work by each target time (rows)."""
    Y = np.asarray(finish_times, dtype=float)[:, None]
    x = problem.data_size - Y * problem.v_lc / problem.intensity
    return np.clip(x, problem.lower, problem.data_size)


def curve_search(problem: ServerProblem, hints=None) -> tuple[np.ndarray, float]:
    """Best offload vector along the local-finish-time curve.

    For any offload vector, the curve point with the same local finish time
    offloads no more per UE, so it uploads and executes no more: the optimum
    over the box lies on this one-parameter family. A coarse grid plus
    zoom-in rounds locates it; fixed-ratio points and any ``hints`` (earlier
    solutions of the same group) are always candidates.
    """
    D, lb = problem.data_size, problem.lower
    y_max = float(np.max(problem.intensity * (D - lb) / problem.v_lc))
    fixed = [midpoint_start(problem), lb, np.maximum(0.5 * D, lb), D]
    if hints is not None:
        fixed.extend(problem.clip(h) for h in np.atleast_2d(hints))
    fixed = np.vstack(fixed)
    ys = np.linspace(0.0, y_max, _COARSE)
    J_fixed = problem.objective(fixed)
    J = problem.objective(curve_points(problem, ys))
    best = int(np.argmin(J_fixed))
    x_best, j_best = fixed[best], float(J_fixed[best])
    centres = ys[np.argsort(J, kind="stable")[:_SEEDS]]
    if J.min() < j_best:
        x_best, j_best = curve_points(problem, ys[[int(np.argmin(J))]])[0], float(J.min())
    half = y_max / (_COARSE - 1)
    offsets = np.linspace(-1.0, 1.0, _FINE)
    for _ in range(_ROUNDS):
        # all zoom windows are evaluated in one batch
        ys_r = np.clip(centres[:, None] + half * offsets[None, :], 0.0, y_max)
        Xr = curve_points(problem, ys_r.ravel())
        Jr = problem.objective(Xr).reshape(ys_r.shape)
        i = int(np.argmin(Jr))
        if Jr.flat[i] < j_best:
            x_best, j_best = Xr[i], float(Jr.flat[i])
        centres = ys_r[np.arange(len(centres)), np.argmin(Jr, axis=1)]
        half *= 2.0 / (_FINE - 1)
    return x_best.copy(), j_best


def optimize_server(problem: ServerProblem, theta_max: int = 30, tol: float = 1e-4,
                    start: str = CURVE, sca_iters: int = 50,
                    sca_tol: float = 1e-6, hints=None) -> ServerSolution:
    """Minimise one server's completion time for a fixed group and bandwidth.

    ``start="curve"`` warm-starts from :func:`curve_search`;
    ``start="midpoint"`` uses the energy-floor/full-offload midpoint.
    Under TDMA the curve optimum is returned directly.
    """
    if problem.n == 0:
        return ServerSolution(np.zeros(0), 0.0, 0.0, ServerSchedule.empty())
    if not problem.bandwidth > 0:
        raise ValueError("a non-empty server needs bandwidth > 0")
    if np.any(problem.lower > problem.data_size):
        raise AssertionError("energy floor above program size")

    if start == CURVE:
        x, _ = curve_search(problem, hints)
    elif start == MIDPOINT:
        x = midpoint_start(problem)
    else:
        raise ValueError(f"unknown start {start!r}")

    sched = problem.schedule(x)
    trace = [sched.t_ttl]
    it = 0
    if problem.access != TDMA:
        for it in range(1, theta_max + 1):
            st = sca_optimize(problem, sched.t_pm, sched.t_ir, x, sca_iters, sca_tol)
            new = problem.schedule(st.x)
            if new.t_ttl > sched.t_ttl:  # guard against round-off in the re-solve
                trace.append(sched.t_ttl)
                break
            gain = sched.t_ttl - new.t_ttl
            x, sched = st.x, new
            trace.append(sched.t_ttl)
            if gain < tol:
                break
    return ServerSolution(np.asarray(x, dtype=float), sched.t_pm, sched.t_ir, sched, it, trace)


def solve_group(scenario, server: int, ue_ids, bandwidth: float, access=None,
                **kwargs) -> ServerSolution:
    problem = ServerProblem.from_scenario(scenario, server, ue_ids, bandwidth, access)
    return optimize_server(problem, **kwargs)
