"""NOMA uplink algebra and minimum-upload-time solvers.

Positions are indexed in decode order (see :func:`decode_order`): the UE at
position ``l`` sees interference from positions ``0..l-1``, so position 0
is interference-free. Loads are bits, gains are dimensionless power gains,
``w`` is the server bandwidth in Hz and ``n0`` the noise density in W/Hz.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

LN2 = math.log(2.0)
_NEWTON_MAX_ITER = 100
_REL_TOL = 1e-15


class ConvergenceError(RuntimeError):
    """Root finding failed to converge (should not happen for valid inputs)."""


def decode_order(ue_ids: Sequence[int], gains: Sequence[float],
                 p_max: Sequence[float] | float = 1.0) -> list[int]:
    """Indices into ``ue_ids`` by ascending full-power received strength ``p_max * gain``.

    Position ``l`` is interfered by positions before it, so the strongest UE
    sits last and is cancelled first. The reverse order can be slower than
    plain time slicing; this one never is. Ties go to the lower UE id.
    """
    caps = np.broadcast_to(np.asarray(p_max, dtype=float), (len(ue_ids),))
    return sorted(range(len(ue_ids)), key=lambda j: (caps[j] * gains[j], ue_ids[j]))


@dataclass(frozen=True)
class UplinkSolution:
    upload_time: float
    powers: np.ndarray
    theta: float
    binding_position: int | None


def achievable_rates(powers, gains, w: float, n0: float) -> np.ndarray:
    """Per-position rates with interference from earlier decode positions."""
    rx = np.asarray(powers, dtype=float) * np.asarray(gains, dtype=float)
    interference = np.cumsum(rx) - rx
    return w * np.log2(1.0 + rx / (interference + w * n0))


def achievable_rate(powers, gains, w: float, n0: float, position: int) -> float:
    return float(achievable_rates(powers, gains, w, n0)[position])


def min_powers_for_time(loads, gains, w: float, n0: float, T: float) -> np.ndarray:
    """Minimum powers that deliver ``loads`` within ``T`` seconds.

    Broadcasts over leading axes of ``loads``; the last axis is decode order.
    """
    if not T > 0:
        raise ValueError("upload time T must be > 0")
    loads = np.asarray(loads, dtype=float)
    sigma = w * n0 / np.asarray(gains, dtype=float)
    scale = LN2 / (T * w)
    prior = np.cumsum(loads, axis=-1) - loads
    return sigma * np.expm1(scale * loads) * np.exp(scale * prior)


def capacity_violation(theta: float, position: int, loads, gains, w: float,
                       n0: float, p_max: float) -> float:
    """Power needed at rate ``theta = 1/T`` minus the power cap, for one position.

    Position 0 uses an empty prior sum, so the cap of the strongest UE is
    enforced too.
    """
    if theta < 0:
        raise ValueError("theta must be >= 0")
    loads = np.asarray(loads, dtype=float)
    total = float(np.sum(loads[: position + 1]))
    prior = total - float(loads[position])
    sigma = w * n0 / float(gains[position])
    return sigma * (2.0 ** (theta * total / w) - 2.0 ** (theta * prior / w)) - p_max


def _thetas(loads: np.ndarray, sigma: np.ndarray, w: float,
            p_max: np.ndarray) -> np.ndarray:
    """Root of the capacity constraint per (row, position); inf for zero loads.

    The constraint ``sigma*(exp(a*th) - exp(b*th)) = p_max`` with
    ``a = ln2*C_l/w`` and ``b = ln2*C_{l-1}/w`` is solved in log form,
    ``b*th + log(expm1((a-b)*th)) = log(p_max/sigma)``, which is concave and
    increasing in ``th``: Newton from the left bracket end climbs
    monotonically onto the root and never overflows.
    """
    cum = np.cumsum(loads, axis=-1)
    a = LN2 * cum / w
    c = LN2 * loads / w  # not a - b: a tiny load would cancel to zero
    b = a - c
    active = c > 0  # loads so small that c underflows can never bind
    c_safe = np.where(active, c, 1.0)
    a_safe = np.where(active, a, 1.0)
    target = np.log(p_max / sigma)
    head = np.log1p(p_max / sigma)
    lo = np.broadcast_to(head, a.shape) / a_safe
    hi = np.broadcast_to(head, a.shape) / c_safe
    th = lo.copy()

    def g(t):
        return b * t + np.log(np.expm1(c_safe * t)) - target

    for _ in range(_NEWTON_MAX_ITER):
        val = g(th)
        slope = b - c_safe / np.expm1(-c_safe * th)
        step = val / slope
        nxt = th - step
        bad = ~((nxt >= lo) & (nxt <= hi)) | ~np.isfinite(nxt)
        if np.any(bad):
            # bisection fallback keeps the bracket; only reachable at fp extremes
            lo = np.where(val < 0, np.maximum(lo, th), lo)
            hi = np.where(val > 0, np.minimum(hi, th), hi)
            nxt = np.where(bad, 0.5 * (lo + hi), nxt)
        done = np.abs(nxt - th) <= _REL_TOL * np.abs(nxt)
        th = nxt
        if np.all(done | ~active):
            break
    else:
        raise ConvergenceError("Newton iteration for the upload-time root did not converge")
    return np.where(active, th, np.inf)


def upload_times(loads, gains, w: float, n0: float, p_max) -> np.ndarray:
    """Minimum NOMA upload time for every row of ``loads`` (batched).

    Rows with zero total load take zero time; ``w == 0`` with a positive
    load takes infinite time.
    """
    loads = np.atleast_2d(np.asarray(loads, dtype=float))
    if w <= 0:
        return np.where(loads.sum(axis=-1) > 0, np.inf, 0.0)
    sigma = w * n0 / np.asarray(gains, dtype=float)
    theta = _thetas(loads, sigma, w, np.asarray(p_max, dtype=float)).min(axis=-1)
    with np.errstate(divide="ignore"):
        return np.where(np.isinf(theta), 0.0, 1.0 / theta)


def solve_min_upload_time(loads, gains, w: float, n0: float, p_max) -> UplinkSolution:
    """Minimum-time NOMA upload of ``loads`` under per-UE power caps.

    Each UE's largest feasible rate parameter theta is the unique root of its
    capacity constraint; the server runs at the smallest of them.
    """
    loads = np.asarray(loads, dtype=float)
    if loads.ndim != 1 or loads.size == 0:
        raise ValueError("loads must be a non-empty vector")
    if not w > 0:
        raise ValueError("bandwidth must be > 0")
    if np.any(loads < 0):
        raise ValueError("loads must be >= 0")
    if not np.any(loads > 0):
        return UplinkSolution(0.0, np.zeros_like(loads), math.inf, None)
    sigma = w * n0 / np.asarray(gains, dtype=float)
    thetas = _thetas(loads[None, :], sigma, w, np.asarray(p_max, dtype=float))[0]
    pos = int(np.argmin(thetas))
    theta = float(thetas[pos])
    if math.isinf(theta):  # only sub-resolution loads
        return UplinkSolution(0.0, np.zeros_like(loads), math.inf, None)
    T = 1.0 / theta
    return UplinkSolution(T, min_powers_for_time(loads, gains, w, n0, T), theta, pos)


def tdma_rates(gains, w: float, n0: float, p_max) -> np.ndarray:
    g = np.asarray(gains, dtype=float)
    return w * np.log2(1.0 + np.asarray(p_max, dtype=float) * g / (w * n0))


def tdma_upload_times(loads, gains, w: float, n0: float, p_max) -> np.ndarray:
    """Batched TDMA upload time: exclusive slices at full power."""
    loads = np.atleast_2d(np.asarray(loads, dtype=float))
    if w <= 0:
        return np.where(loads.sum(axis=-1) > 0, np.inf, 0.0)
    return (loads / tdma_rates(gains, w, n0, p_max)).sum(axis=-1)


def tdma_min_upload_time(loads, gains, w: float, n0: float, p_max) -> UplinkSolution:
    loads = np.asarray(loads, dtype=float)
    if not w > 0:
        raise ValueError("bandwidth must be > 0")
    T = float(tdma_upload_times(loads, gains, w, n0, p_max)[0])
    powers = np.where(loads > 0, np.broadcast_to(np.asarray(p_max, dtype=float), loads.shape), 0.0)
    theta = math.inf if T == 0 else 1.0 / T
    return UplinkSolution(T, powers, theta, None)
