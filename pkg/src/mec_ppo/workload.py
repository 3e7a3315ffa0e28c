"""Per-server problem instance: the UEs of one server, in SIC decode order."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import noma
from .scenario import NOMA, TDMA, Scenario
from .timing import ServerSchedule, min_offload_bound, uploaded_intermediate


@dataclass(frozen=True, eq=False)
class ServerProblem:
    server: int
    ue_ids: tuple[int, ...]
    data_size: np.ndarray
    intensity: np.ndarray
    v_lc: np.ndarray
    p_max: np.ndarray
    k: np.ndarray
    b: np.ndarray
    lower: np.ndarray  # energy-feasible lower bound on the offload
    gains: np.ndarray
    bandwidth: float
    noise_density: float
    v_srv: float
    access: str = NOMA

    @classmethod
    def from_scenario(cls, scenario: Scenario, server: int, ue_ids,
                      bandwidth: float, access: str | None = None) -> "ServerProblem":
        ue_ids = list(ue_ids)
        g_row = scenario.gains[server]
        order = noma.decode_order(ue_ids, [g_row[n] for n in ue_ids],
                                  [scenario.ues[n].max_power for n in ue_ids])
        ues = [scenario.ues[ue_ids[j]] for j in order]

        def arr(f):
            return np.array([f(u) for u in ues], dtype=float)

        return cls(
            server=server,
            ue_ids=tuple(u.id for u in ues),
            data_size=arr(lambda u: u.program.data_size),
            intensity=arr(lambda u: u.program.intensity),
            v_lc=arr(lambda u: u.compute_speed),
            p_max=arr(lambda u: u.max_power),
            k=arr(lambda u: u.program.k),
            b=arr(lambda u: u.program.b),
            lower=arr(min_offload_bound),
            gains=arr(lambda u: g_row[u.id]),
            bandwidth=float(bandwidth),
            noise_density=scenario.noise_density,
            v_srv=scenario.servers[server].compute_speed,
            access=access or scenario.access_mode,
        )

    @property
    def n(self) -> int:
        return len(self.ue_ids)

    def upload_times(self, loads) -> np.ndarray:
        fn = noma.tdma_upload_times if self.access == TDMA else noma.upload_times
        return fn(loads, self.gains, self.bandwidth, self.noise_density, self.p_max)

    def intermediate(self, X):
        return uploaded_intermediate(self.k, self.b, X)

    def local_times(self, X) -> np.ndarray:
        return self.intensity * (self.data_size - np.asarray(X, dtype=float)) / self.v_lc

    def evaluate(self, X) -> dict[str, np.ndarray]:
        """Phase durations for a batch of offload vectors (rows of ``X``)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        t_lc = self.local_times(X).max(axis=-1)
        t_pm = self.upload_times(X)
        t_ir = self.upload_times(self.intermediate(X))
        t_srv = X @ self.intensity / self.v_srv
        return {
            "t_lc": t_lc, "t_pm": t_pm, "t_ir": t_ir, "t_srv": t_srv,
            "t_ttl": np.maximum(t_lc, t_pm) + t_ir + t_srv,
        }

    def objective(self, X) -> np.ndarray:
        return self.evaluate(X)["t_ttl"]

    def clip(self, x) -> np.ndarray:
        return np.clip(x, self.lower, self.data_size)

    def schedule(self, x) -> ServerSchedule:
        """Full schedule (durations and powers) for one offload vector."""
        x = np.asarray(x, dtype=float)
        solve = noma.tdma_min_upload_time if self.access == TDMA else noma.solve_min_upload_time
        args = (self.gains, self.bandwidth, self.noise_density, self.p_max)
        pm = solve(x, *args)
        ir = solve(self.intermediate(x), *args)
        t_lc = float(self.local_times(x).max())
        t_srv = float(x @ self.intensity / self.v_srv)
        return ServerSchedule(
            t_lc, pm.upload_time, ir.upload_time, t_srv,
            max(t_lc, pm.upload_time) + ir.upload_time + t_srv,
            self.ue_ids, tuple(map(float, pm.powers)), tuple(map(float, ir.powers)),
        )
