"""Brute-force verifiers.

Nothing here calls into the solvers it is used to check: powers and rates
are rebuilt from the SINR definitions directly, roots are bracketed by plain
bisection and optima are found by exhaustive grids.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


@dataclass(frozen=True)
class OracleReport:
    value: float
    target: float
    abs_error: float
    rel_error: float
    passed: bool
    meta: dict = field(default_factory=dict)

    @classmethod
    def compare(cls, value, target, rtol: float, atol: float = 0.0, **meta) -> "OracleReport":
        value, target = float(value), float(target)
        err = abs(value - target)
        rel = err / abs(target) if target != 0 else (0.0 if err == 0 else math.inf)
        return cls(value, target, err, rel, bool(err <= atol + rtol * abs(target)), meta)


class OracleError(RuntimeError):
    """An oracle could not produce an answer (bad bracket, empty feasible set)."""


def bisect_root(f: Callable[[float], float], lo: float, hi: float,
                tol: float = 1e-12, max_iter: int = 2000) -> float:
    """Root of an increasing ``f`` with ``f(lo) < 0 < f(hi)``; stops when the
    bracket is narrower than ``tol`` relative to its upper end (or absolutely)."""
    flo, fhi = f(lo), f(hi)
    if not (flo < 0 < fhi):
        raise OracleError(f"root not bracketed: f({lo})={flo}, f({hi})={fhi}")
    for _ in range(max_iter):
        if hi - lo <= tol * max(1.0, abs(hi)):
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def grid_search(objective: Callable[[np.ndarray], np.ndarray],
                constraints: Sequence[Callable[[np.ndarray], np.ndarray]],
                box: Sequence[tuple[float, float]], resolution: int = 200,
                refine: int = 0, shrink: float = 0.1) -> tuple[np.ndarray, float]:
    """Best feasible point of a tensor grid over ``box``.

    ``objective`` and each constraint (feasible when ``<= 0``) take an array
    of points with shape ``(m, d)``. ``refine`` extra rounds re-grid a box
    ``shrink`` times the size around the incumbent.
    """
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    lo = np.array([b[0] for b in box], dtype=float)
    hi = np.array([b[1] for b in box], dtype=float)
    best_x, best_f = None, math.inf
    for _ in range(refine + 1):
        axes = [np.linspace(a, b, resolution) for a, b in zip(lo, hi)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(box))
        ok = np.ones(len(pts), dtype=bool)
        for c in constraints:
            ok &= np.asarray(c(pts)) <= 0
        if ok.any():
            vals = np.where(ok, objective(pts), np.inf)
            i = int(np.argmin(vals))
            if vals[i] < best_f:
                best_x, best_f = pts[i].copy(), float(vals[i])
        if best_x is None:
            raise OracleError("no feasible grid point")
        span = (hi - lo) * shrink
        glo = np.array([b[0] for b in box], dtype=float)
        ghi = np.array([b[1] for b in box], dtype=float)
        lo = np.maximum(glo, best_x - span / 2)
        hi = np.minimum(ghi, best_x + span / 2)
    return best_x, best_f


def finite_difference_gradient(f: Callable[[np.ndarray], float], x, h) -> np.ndarray:
    """Central differences; ``h`` may be a scalar or a per-coordinate step."""
    x = np.asarray(x, dtype=float)
    h = np.broadcast_to(np.asarray(h, dtype=float), x.shape)
    if np.any(h <= 0):
        raise ValueError("h must be > 0")
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h[i]
        g[i] = (f(x + e) - f(x - e)) / (2 * h[i])
    return g


def sinr_rates(powers, gains, w: float, n0: float) -> np.ndarray:
    """Rates with each position interfered by every earlier position, by explicit sums."""
    p = [float(v) for v in powers]
    g = [float(v) for v in gains]
    out = []
    for l in range(len(p)):
        interference = sum(p[j] * g[j] for j in range(l))
        out.append(w * math.log1p(p[l] * g[l] / (interference + w * n0)) / math.log(2.0))
    return np.array(out)


def product_form_powers(loads, gains, w: float, n0: float, T: float) -> np.ndarray:
    """Powers from per-position SINR targets ``2^{load/(T w)} - 1``.

    Each UE must beat noise plus the already-placed interference, solved
    position by position instead of through the closed form.
    """
    out = []
    interference = 0.0
    for load, g in zip(loads, gains):
        target = 2.0 ** (float(load) / (T * w)) - 1.0
        p = target * (interference + w * n0) / float(g)
        out.append(p)
        interference += p * float(g)
    return np.array(out)


def roundtrip_check(loads, gains, w: float, n0: float, T: float,
                    rtol: float = 1e-9, powers_fn=None) -> OracleReport:
    """Powers for ``(loads, T)`` must deliver exactly ``loads`` in ``T`` seconds.

    ``powers_fn`` defaults to the uplink module's closed form; the rates are
    always recomputed here from the SINR definition.
    """
    if not T > 0:
        raise ValueError("T must be > 0")
    if powers_fn is None:
        from .noma import min_powers_for_time as powers_fn
    loads = np.asarray(loads, dtype=float)
    p = np.asarray(powers_fn(loads, gains, w, n0, T), dtype=float)
    delivered = sinr_rates(p, gains, w, n0) * T
    err = np.abs(delivered - loads)
    scale = np.maximum(np.abs(loads), 1e-300)
    rel = float(np.max(np.where(loads > 0, err / scale, err)))
    worst = int(np.argmax(err))
    return OracleReport(float(delivered[worst]), float(loads[worst]), float(err.max()), rel,
                        rel <= rtol and bool(np.all(p[loads == 0] == 0)),
                        {"powers": p.tolist()})


def product_form_powers_batch(loads, gains, w: float, n0: float, T) -> np.ndarray:
    """Vectorised :func:`product_form_powers` over rows of ``loads`` and entries of ``T``."""
    loads = np.atleast_2d(np.asarray(loads, dtype=float))
    T = np.asarray(T, dtype=float).reshape(-1)
    out = np.empty_like(loads)
    interference = np.zeros(len(loads))
    for l in range(loads.shape[1]):
        target = np.expm1(np.log(2.0) * loads[:, l] / (T * w))
        p = target * (interference + w * n0) / float(gains[l])
        out[:, l] = p
        interference = interference + p * float(gains[l])
    return out


def joint_upload_times(loads, gains, w: float, n0: float, p_max,
                       lo: float = 1e-9, hi: float = 1e9, iters: int = 200) -> np.ndarray:
    """Smallest T per row whose product-form powers respect every cap.

    Geometric bisection on T; required power only falls as T grows.
    """
    loads = np.atleast_2d(np.asarray(loads, dtype=float))
    caps = np.broadcast_to(np.asarray(p_max, dtype=float), loads.shape[1:])
    a = np.full(len(loads), lo)
    b = np.full(len(loads), hi)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(iters):
            m = np.sqrt(a * b)
            p = product_form_powers_batch(loads, gains, w, n0, m)
            ok = np.all(p <= caps, axis=1)
            b = np.where(ok, m, b)
            a = np.where(ok, a, m)
    return np.where(loads.sum(axis=1) > 0, b, 0.0)


def joint_upload_time(loads, gains, w: float, n0: float, p_max) -> float:
    return float(joint_upload_times(loads, gains, w, n0, p_max)[0])


def capacity_root(load_prior: float, load_own: float, gain: float, w: float,
                  n0: float, p_max: float, tol: float = 1e-14) -> float:
    """Rate parameter theta at which one position needs exactly its power cap."""
    sigma = w * n0 / gain

    def F(theta):
        with np.errstate(over="ignore"):
            grow = np.exp2(theta * load_prior / w)
            own = np.expm1(math.log(2.0) * theta * load_own / w)
        return float(sigma * grow * own - p_max)

    hi = 1.0 / max(load_prior + load_own, 1.0)
    while F(hi) <= 0:
        hi *= 2.0
    return bisect_root(F, 0.0, hi, tol)


def server_time_grid(problem, resolution: int = 41, refine: int = 4):
    """Joint oracle for a small server problem: grid over offloads, with both
    upload times from :func:`joint_upload_times`. Returns ``(x, T_ttl)``."""
    D = problem.data_size
    args = (problem.gains, problem.bandwidth, problem.noise_density, problem.p_max)

    def total(pts):
        s = np.where(pts > 0, problem.k * pts + problem.b, 0.0)
        t_pm = joint_upload_times(pts, *args)
        t_ir = joint_upload_times(s, *args)
        t_lc = np.max(problem.intensity * (D - pts) / problem.v_lc, axis=1)
        return np.maximum(t_lc, t_pm) + t_ir + pts @ problem.intensity / problem.v_srv

    return grid_search(total, [], list(zip(problem.lower, D)), resolution, refine, shrink=0.15)
