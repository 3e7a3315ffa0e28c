"""Workflow timing: local execution, uploads, remote execution, makespan."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .scenario import UEProfile


@dataclass(frozen=True)
class OffloadDecision:
    ue_id: int
    d_off: float  # bits
    s: float  # bits of intermediate result actually uploaded


@dataclass(frozen=True)
class ServerSchedule:
    t_lc: float
    t_pm: float
    t_ir: float
    t_srv: float
    t_ttl: float
    ue_ids: tuple[int, ...] = ()
    p_pm: tuple[float, ...] = ()
    p_ir: tuple[float, ...] = ()

    @classmethod
    def empty(cls) -> "ServerSchedule":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0)

    def to_dict(self) -> dict:
        return {
            "t_lc": self.t_lc, "t_pm": self.t_pm, "t_ir": self.t_ir,
            "t_srv": self.t_srv, "t_ttl": self.t_ttl,
            "ue_ids": list(self.ue_ids),
            "p_pm": list(self.p_pm), "p_ir": list(self.p_ir),
        }


def local_compute_time(ue: UEProfile, d_off: float) -> float:
    D = ue.program.data_size
    if not 0 <= d_off <= D:
        raise ValueError(f"d_off={d_off} outside [0, {D}]")
    return ue.program.intensity * (D - d_off) / ue.compute_speed


def group_local_time(group: Sequence[UEProfile], decisions: Mapping[int, float]) -> float:
    """Slowest local execution in the group; an empty group takes no time."""
    return max((local_compute_time(u, decisions[u.id]) for u in group), default=0.0)


def server_exec_time(group: Sequence[UEProfile], decisions: Mapping[int, float],
                     v_srv: float) -> float:
    if not v_srv > 0:
        raise ValueError("server speed must be > 0")
    return sum(u.program.intensity * decisions[u.id] for u in group) / v_srv


def server_total_time(t_lc: float, t_pm: float, t_ir: float, t_srv: float) -> float:
    """Phase 1 runs local compute and program upload in parallel."""
    return max(t_lc, t_pm) + t_ir + t_srv


def system_makespan(schedules: Sequence[ServerSchedule]) -> float:
    if not schedules:
        raise ValueError("need at least one schedule")
    return max(s.t_ttl for s in schedules)


def min_offload_bound(ue: UEProfile) -> float:
    """Smallest offload that keeps local computation within the energy budget."""
    p = ue.program
    slack = ue.energy_budget * ue.compute_speed / (ue.compute_power_draw * p.intensity)
    return max(0.0, p.data_size - slack)


def local_energy(ue: UEProfile, d_off: float) -> float:
    return ue.compute_power_draw * local_compute_time(ue, d_off)


def uploaded_intermediate(k, b, d_off):
    """Intermediate-result bits actually sent: none when nothing is offloaded."""
    d_off = np.asarray(d_off, dtype=float)
    return np.where(d_off > 0, k * d_off + b, 0.0)
