"""Offload partitioning by successive convex approximation.

With the two upload durations held fixed, the per-server problem becomes:
choose offload sizes ``x`` (bits, decode order) minimising

    max(max_n F_n (D_n - x_n) / v_n, T_pm) + T_ir + sum_n F_n x_n / v_srv

subject to the power caps implied by uploading ``x`` within ``T_pm`` and the
intermediate results ``k x + b`` within ``T_ir``, the energy floor and the box.
The power caps are non-convex; each iteration replaces them with a convexified
second-order model around the current point.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import noma
from .workload import ServerProblem

log = logging.getLogger(__name__)

PROGRAM = "program"
INTERMEDIATE = "intermediate"


def exp_power_terms(loads, sigma, log_alpha):
    """Powers ``sigma_l (a^{C_l} - a^{C_{l-1}})`` with exact first and second derivatives.

    ``C_l`` is the cumulative load up to decode position ``l`` and
    ``log_alpha = ln(a)`` per bit. Returns values ``(n,)``, gradients ``(n, n)``
    (row ``l`` is the gradient of power ``l``) and Hessians ``(n, n, n)``.
    """
    y = np.asarray(loads, dtype=float)
    n = y.size
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (n,))
    cum = np.cumsum(y)
    upper = sigma * np.exp(log_alpha * cum)
    lower = sigma * np.exp(log_alpha * (cum - y))
    values = upper - lower

    idx = np.arange(n)
    le = (idx[None, :] <= idx[:, None]).astype(float)  # j <= l
    lt = (idx[None, :] < idx[:, None]).astype(float)  # j < l
    grads = log_alpha * (upper[:, None] * le - lower[:, None] * lt)
    hess = log_alpha ** 2 * (
        upper[:, None, None] * le[:, :, None] * le[:, None, :]
        - lower[:, None, None] * lt[:, :, None] * lt[:, None, :]
    )
    return values, grads, hess


def power_value_grad_hess(x, gains, w: float, n0: float, T: float,
                          which: str = PROGRAM, k=None, b=None):
    """Powers needed to upload within ``T`` and their derivatives in ``x``.

    For ``which="intermediate"`` the loads are ``k x + b`` and the chain rule
    scales derivatives by ``k``.
    """
    if not T > 0:
        raise ValueError("T must be > 0")
    x = np.asarray(x, dtype=float)
    sigma = w * n0 / np.asarray(gains, dtype=float)
    log_alpha = noma.LN2 / (T * w)
    if which == PROGRAM:
        return exp_power_terms(x, sigma, log_alpha)
    if which != INTERMEDIATE:
        raise ValueError(f"unknown power family {which!r}")
    k = np.broadcast_to(np.asarray(k, dtype=float), x.shape)
    values, grads, hess = exp_power_terms(k * x + b, sigma, log_alpha)
    return values, grads * k[None, :], hess * k[None, :, None] * k[None, None, :]


def coordinate_lipschitz(x, position: int, gains, w: float, n0: float, T: float,
                         upper: float):
    """Diagnostics for the own-coordinate derivative ``H(s) = dp_l/dx_l`` on ``[0, upper]``.

    Returns ``(secant, sup_slope)``: the chord slope ``(H(upper) - H(0))/upper``
    and the true Lipschitz constant ``max |H'|``. ``H`` is convex, so the chord
    slope underestimates the true constant whenever the load matters.
    """
    x = np.array(x, dtype=float)
    sigma = w * n0 / float(gains[position])
    log_alpha = noma.LN2 / (T * w)
    prior = float(np.sum(x[:position]))

    def H(s):
        return sigma * log_alpha * math.exp(log_alpha * (prior + s))

    secant = (H(upper) - H(0.0)) / upper
    sup_slope = log_alpha * H(upper)  # H' = ln(a) H, largest at the right end
    return secant, sup_slope


@dataclass(frozen=True)
class SurrogateModel:
    """Second-order power models around ``x0``; Hessians are PSD-projected."""
    x0: np.ndarray
    values: np.ndarray  # (families*n,)
    grads: np.ndarray  # (families*n, n)
    hess: np.ndarray  # (families*n, n, n)
    caps: np.ndarray  # (families*n,)
    clamped: int = 0  # number of Hessians that needed eigenvalue clamping
    tau: float = 0.0

    def __call__(self, x) -> np.ndarray:
        d = np.asarray(x, dtype=float) - self.x0
        return (self.values + self.grads @ d + 0.5 * np.einsum("mij,i,j->m", self.hess, d, d)
                + 0.5 * self.tau * float(d @ d))

    def gradient(self, x) -> np.ndarray:
        d = np.asarray(x, dtype=float) - self.x0
        return self.grads + np.einsum("mij,j->mi", self.hess, d) + self.tau * d[None, :]


def _psd(h):
    vals, vecs = np.linalg.eigh(0.5 * (h + h.T))
    if vals.min() >= 0:
        return h, False
    return (vecs * np.clip(vals, 0.0, None)) @ vecs.T, True


def build_surrogate(problem: ServerProblem, x0, t_pm: float, t_ir: float,
                    tau: float = 0.0) -> SurrogateModel:
    """Convexified models of both power families at ``x0``.

    A family whose upload time is zero carries no load and contributes nothing.
    """
    x0 = np.asarray(x0, dtype=float)
    parts = []
    args = (problem.gains, problem.bandwidth, problem.noise_density)
    if t_pm > 0:
        parts.append(power_value_grad_hess(x0, *args, t_pm, PROGRAM))
    if t_ir > 0:
        parts.append(power_value_grad_hess(x0, *args, t_ir, INTERMEDIATE, problem.k, problem.b))
    n = problem.n
    if not parts:
        empty = np.zeros((0,))
        return SurrogateModel(x0, empty, np.zeros((0, n)), np.zeros((0, n, n)), empty, 0, tau)
    values = np.concatenate([p[0] for p in parts])
    grads = np.concatenate([p[1] for p in parts])
    hess = []
    clamped = 0
    for h in np.concatenate([p[2] for p in parts]):
        h2, c = _psd(h)
        hess.append(h2)
        clamped += c
    if clamped:
        log.debug("clamped %d indefinite surrogate Hessians", clamped)
    caps = np.tile(problem.p_max, len(parts))
    return SurrogateModel(x0, values, grads, np.array(hess), caps, clamped, tau)


def subproblem_objective(problem: ServerProblem, x, t_pm: float, t_ir: float) -> float:
    x = np.asarray(x, dtype=float)
    t_lc = float(np.max(problem.intensity * (problem.data_size - x) / problem.v_lc))
    return max(t_lc, t_pm) + t_ir + float(problem.intensity @ x) / problem.v_srv


def solve_convex_subproblem(problem: ServerProblem, surrogate: SurrogateModel,
                            t_pm: float, t_ir: float) -> np.ndarray:
    """Minimise the fixed-duration objective under the surrogate power caps.

    Epigraph form in scaled variables ``u = x / D`` and ``z`` (phase-1 time),
    solved with SLSQP. Falls back to the expansion point if the solver fails.
    """
    D = problem.data_size
    F, v = problem.intensity, problem.v_lc
    n = problem.n
    x0 = surrogate.x0
    scale = max(1.0, subproblem_objective(problem, x0, t_pm, t_ir))
    srv = F * D / problem.v_srv / scale
    local_slope = F * D / v / scale

    def unpack(vz):
        return vz[:n] * D, vz[n]

    def obj(vz):
        return vz[n] + srv @ vz[:n]

    def obj_jac(vz):
        return np.concatenate([srv, [1.0]])

    def cons(vz):
        x, z = unpack(vz)
        local = z - F * (D - x) / v / scale
        power = 1.0 - surrogate(x) / surrogate.caps
        return np.concatenate([local, power])

    def cons_jac(vz):
        x, _ = unpack(vz)
        jl = np.hstack([np.diag(local_slope), np.ones((n, 1))])
        gp = -surrogate.gradient(x) * D[None, :] / surrogate.caps[:, None]
        jp = np.hstack([gp, np.zeros((gp.shape[0], 1))])
        return np.vstack([jl, jp])

    z0 = subproblem_objective(problem, x0, t_pm, 0.0) / scale
    start = np.concatenate([x0 / D, [z0]])
    bounds = [(lo, 1.0) for lo in problem.lower / D] + [(t_pm / scale, None)]
    with warnings.catch_warnings():
        # SLSQP clips trial points to the bounds and says so; that is expected
        warnings.simplefilter("ignore", RuntimeWarning)
        res = minimize(obj, start, jac=obj_jac, method="SLSQP", bounds=bounds,
                       constraints=[{"type": "ineq", "fun": cons, "jac": cons_jac}],
                       options={"maxiter": 200, "ftol": 1e-12})
    if not res.success or not np.all(np.isfinite(res.x)):
        log.debug("subproblem solver failed (%s); keeping expansion point", res.message)
        return x0.copy()
    return problem.clip(res.x[:n] * D)


def powers_within_caps(problem: ServerProblem, x, t_pm: float, t_ir: float,
                       rtol: float = 1e-9) -> bool:
    """Exact check: can ``x`` and its intermediate results upload within the given times?"""
    x = np.asarray(x, dtype=float)
    caps = problem.p_max * (1.0 + rtol)
    args = (problem.gains, problem.bandwidth, problem.noise_density)
    with np.errstate(over="ignore", invalid="ignore"):
        for loads, T in ((x, t_pm), (problem.intermediate(x), t_ir)):
            if not np.any(loads > 0):
                continue
            if T <= 0:
                return False
            p = noma.min_powers_for_time(loads, *args, T)
            if not np.all(p <= caps):
                return False
    return True


@dataclass
class SCAState:
    t: int
    x: np.ndarray
    trace: list[float] = field(default_factory=list)
    step: float = 1.0
    converged: bool = False
    clamped: int = 0


def sca_optimize(problem: ServerProblem, t_pm: float, t_ir: float, x0,
                 t_max: int = 50, tol: float = 1e-6, max_halvings: int = 30) -> SCAState:
    """Damped SCA with a 1/t step and exact-feasibility backtracking.

    ``x0`` must satisfy the exact power caps at ``(t_pm, t_ir)``; every
    accepted iterate does too, and the objective never increases.
    """
    x = problem.clip(np.asarray(x0, dtype=float))
    state = SCAState(0, x, [subproblem_objective(problem, x, t_pm, t_ir)])
    if problem.n == 0 or not np.any(x > 0):
        state.converged = True
        return state
    for t in range(1, t_max + 1):
        state.t = t
        sur = build_surrogate(problem, x, t_pm, t_ir)
        state.clamped += sur.clamped
        target = solve_convex_subproblem(problem, sur, t_pm, t_ir)
        step = 1.0 / t
        cur = state.trace[-1]
        cand, val = x, cur
        for _ in range(max_halvings):
            trial = problem.clip(x + step * (target - x))
            tv = subproblem_objective(problem, trial, t_pm, t_ir)
            if tv <= cur and powers_within_caps(problem, trial, t_pm, t_ir):
                cand, val = trial, tv
                break
            step *= 0.5
        else:
            step = 0.0
        state.step = step
        x = cand
        state.x = x
        state.trace.append(val)
        if cur - val < tol:
            state.converged = True
            break
    return state
