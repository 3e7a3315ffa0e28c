"""World model: servers, UEs, programs, channel gains.

All quantities are canonical SI: bits, seconds, Hz, W, J, cycles/s and
cycles/bit. Human-facing units (Mb, MHz, GHz, GHz/Mb) are converted once,
when a document is loaded.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

NOMA = "noma"
TDMA = "tdma"
ACCESS_MODES = (NOMA, TDMA)

# factor to canonical SI for every accepted unit tag
UNITS = {
    "bits": 1.0,
    "Mb": 1e6,
    "Hz": 1.0,
    "MHz": 1e6,
    "GHz": 1e9,
    "GHz/Mb": 1e3,
    "W": 1.0,
    "J": 1.0,
}


class ScenarioError(ValueError):
    """Raised for malformed scenario documents or invalid parameters."""


def to_si(value: Any, field_name: str = "value") -> float:
    """Convert a bare number or a ``{"value": x, "unit": u}`` record to SI."""
    if isinstance(value, Mapping):
        if "value" not in value:
            raise ScenarioError(f"{field_name}: unit record without 'value'")
        unit = value.get("unit", "bits")
        if unit not in UNITS:
            raise ScenarioError(f"{field_name}: unknown unit tag {unit!r}")
        return float(value["value"]) * UNITS[unit]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{field_name}: expected a number, got {value!r}")
    return float(value)


@dataclass(frozen=True)
class ProgramSpec:
    data_size: float  # bits
    intensity: float  # cycles/bit
    k: float = 0.0
    b: float = 0.0

    def __post_init__(self):
        if not self.data_size > 0:
            raise ScenarioError("program data_size must be > 0")
        if not self.intensity > 0:
            raise ScenarioError("program intensity must be > 0")
        if self.k < 0 or self.b < 0:
            raise ScenarioError("intermediate-result coefficients must be >= 0")


@dataclass(frozen=True)
class UEProfile:
    id: int
    position: tuple[float, float]
    compute_speed: float  # cycles/s
    max_power: float  # W
    energy_budget: float  # J
    compute_power_draw: float  # W, see decisions on rho
    program: ProgramSpec

    def __post_init__(self):
        if not self.compute_speed > 0:
            raise ScenarioError(f"UE {self.id}: compute_speed must be > 0")
        if not self.max_power > 0:
            raise ScenarioError(f"UE {self.id}: max_power must be > 0")
        if self.energy_budget < 0:
            raise ScenarioError(f"UE {self.id}: energy_budget must be >= 0")
        if not self.compute_power_draw > 0:
            raise ScenarioError(f"UE {self.id}: compute_power_draw must be > 0")


@dataclass(frozen=True)
class ServerProfile:
    id: int
    position: tuple[float, float]
    compute_speed: float  # cycles/s

    def __post_init__(self):
        if not self.compute_speed > 0:
            raise ScenarioError(f"server {self.id}: compute_speed must be > 0")


@dataclass(frozen=True)
class Scenario:
    servers: tuple[ServerProfile, ...]
    ues: tuple[UEProfile, ...]
    gains: tuple[tuple[float, ...], ...]  # row = server, column = UE
    bandwidth: float
    noise_density: float
    access_mode: str = NOMA
    seed: int | None = None

    def __post_init__(self):
        if not self.servers or not self.ues:
            raise ScenarioError("scenario needs at least one server and one UE")
        if len(self.gains) != len(self.servers):
            raise ScenarioError("gains matrix must have one row per server")
        for row in self.gains:
            if len(row) != len(self.ues):
                raise ScenarioError("gains matrix must have one column per UE")
            if not all(g > 0 and math.isfinite(g) for g in row):
                raise ScenarioError("channel gains must be positive and finite")
        if not self.bandwidth > 0:
            raise ScenarioError("bandwidth must be > 0")
        if not self.noise_density > 0:
            raise ScenarioError("noise_density must be > 0")
        if self.access_mode not in ACCESS_MODES:
            raise ScenarioError(f"access_mode must be one of {ACCESS_MODES}")

    @property
    def n_servers(self) -> int:
        return len(self.servers)

    @property
    def n_ues(self) -> int:
        return len(self.ues)

    @property
    def gain_matrix(self) -> np.ndarray:
        return np.asarray(self.gains, dtype=float)

    def with_access(self, access_mode: str) -> "Scenario":
        return replace(self, access_mode=access_mode)


@dataclass(frozen=True)
class IntermediateModel:
    """Linear intermediate-result size model ``S = k * D_off + b``."""

    k: float
    b: float


def intermediate_size(model, d_off: float) -> float:
    """Size of the intermediate result for an offloaded part of ``d_off`` bits.

    ``model`` is anything with ``k`` and ``b`` attributes (an
    ``IntermediateModel`` or a ``ProgramSpec``).
    """
    if d_off < 0:
        raise ValueError("d_off must be >= 0")
    return model.k * d_off + model.b


def fit_intermediate_model(points: Sequence[tuple[float, float]]) -> IntermediateModel:
    """Ordinary least-squares line through ``(d_off, s)`` sample points."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise ValueError("need at least two (d_off, s) points")
    x, y = pts[:, 0], pts[:, 1]
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    if sxx == 0.0:
        raise ValueError("degenerate point set: all d_off values are equal")
    k = float(np.sum((x - xm) * (y - ym))) / sxx
    return IntermediateModel(k=k, b=float(ym - k * xm))


# ---------------------------------------------------------------------------
# random generation
# ---------------------------------------------------------------------------

Range = tuple[float, float]


def _as_range(value, name: str) -> Range:
    if isinstance(value, (int, float)):
        return float(value), float(value)
    lo, hi = value
    if lo > hi:
        raise ScenarioError(f"empty parameter range for {name}: [{lo}, {hi}]")
    return float(lo), float(hi)


@dataclass(frozen=True)
class ScenarioParams:
    """Generation parameters. Defaults follow the simulation table of the
    original study; ranges are sampled uniformly."""

    data_size: float = 200e6
    intensity: float = 2e3
    max_power: Range | float = (0.1, 0.25)
    energy_budget: float = 4.0
    compute_power_draw: float = 0.05
    ue_speed: Range | float = (1.2e9, 4e9)
    server_speed: Range | float = (500e9, 650e9)
    noise_density: float = 1e-20
    bandwidth: float = 20e6
    k: float = 0.001
    b: float = 1.5e6
    area: float = 100.0
    path_loss_exponent: float = 3.0
    min_distance: float = 1.0
    access_mode: str = NOMA
    server_positions: tuple[tuple[float, float], ...] | None = None

    def updated(self, **changes) -> "ScenarioParams":
        known = {f.name for f in fields(self)}
        unknown = set(changes) - known
        if unknown:
            raise ScenarioError(f"unknown scenario parameters: {sorted(unknown)}")
        return replace(self, **changes)


def grid_positions(count: int, area: float) -> list[tuple[float, float]]:
    """Evenly spaced cell centres of a near-square grid inside the area."""
    cols = math.ceil(math.sqrt(count))
    rows = math.ceil(count / cols)
    dx, dy = area / cols, area / rows
    cells = [((c + 0.5) * dx, (r + 0.5) * dy) for r in range(rows) for c in range(cols)]
    return cells[:count]


def channel_gain(g0: float, distance: float, exponent: float = 3.0,
                 min_distance: float = 1.0) -> float:
    return g0 / max(distance, min_distance) ** exponent


def generate_scenario(seed: int, server_count: int, ue_count: int,
                      params: ScenarioParams | None = None) -> Scenario:
    """Random hot-spot scenario, a pure function of its arguments."""
    if server_count < 1 or ue_count < 1:
        raise ScenarioError("server and UE counts must be >= 1")
    p = params or ScenarioParams()
    p_rng = _as_range(p.max_power, "max_power")
    v_rng = _as_range(p.ue_speed, "ue_speed")
    s_rng = _as_range(p.server_speed, "server_speed")
    rng = np.random.default_rng(seed)

    if p.server_positions is not None:
        if len(p.server_positions) < server_count:
            raise ScenarioError("not enough preset server positions")
        spos = [tuple(map(float, xy)) for xy in p.server_positions[:server_count]]
    else:
        spos = grid_positions(server_count, p.area)
    upos = rng.uniform(0.0, p.area, size=(ue_count, 2))
    v_lc = rng.uniform(*v_rng, size=ue_count)
    p_max = rng.uniform(*p_rng, size=ue_count)
    v_srv = rng.uniform(*s_rng, size=server_count)
    g0 = rng.exponential(1.0, size=(server_count, ue_count))

    program = ProgramSpec(p.data_size, p.intensity, p.k, p.b)
    servers = tuple(
        ServerProfile(i, spos[i], float(v_srv[i])) for i in range(server_count)
    )
    ues = tuple(
        UEProfile(n, (float(upos[n, 0]), float(upos[n, 1])), float(v_lc[n]),
                  float(p_max[n]), p.energy_budget, p.compute_power_draw, program)
        for n in range(ue_count)
    )
    gains = tuple(
        tuple(
            channel_gain(float(g0[i, n]), math.dist(spos[i], ues[n].position),
                         p.path_loss_exponent, p.min_distance)
            for n in range(ue_count)
        )
        for i in range(server_count)
    )
    return Scenario(servers, ues, gains, p.bandwidth, p.noise_density,
                    p.access_mode, seed)


# ---------------------------------------------------------------------------
# (de)serialization
# ---------------------------------------------------------------------------

def _require(doc: Mapping, key: str, where: str):
    if key not in doc:
        raise ScenarioError(f"{where}: missing required key {key!r}")
    return doc[key]


def _position(value, where: str) -> tuple[float, float]:
    if not isinstance(value, Sequence) or len(value) != 2:
        raise ScenarioError(f"{where}: position must be a pair of numbers")
    return float(value[0]), float(value[1])


def load_scenario(document: Mapping[str, Any]) -> Scenario:
    """Build a Scenario from a parsed JSON document (see README for the schema)."""
    if not isinstance(document, Mapping):
        raise ScenarioError("scenario document must be a JSON object")
    system = _require(document, "system", "document")
    servers_doc = _require(document, "servers", "document")
    ues_doc = _require(document, "ues", "document")
    gains_doc = _require(document, "gains", "document")

    servers = tuple(
        ServerProfile(
            int(_require(s, "id", "server")),
            _position(_require(s, "position", "server"), "server"),
            to_si(_require(s, "compute_speed", "server"), "server.compute_speed"),
        )
        for s in servers_doc
    )
    ues = []
    for u in ues_doc:
        prog = _require(u, "program", "ue")
        ues.append(UEProfile(
            int(_require(u, "id", "ue")),
            _position(_require(u, "position", "ue"), "ue"),
            to_si(_require(u, "compute_speed", "ue"), "ue.compute_speed"),
            to_si(_require(u, "max_power", "ue"), "ue.max_power"),
            to_si(_require(u, "energy_budget", "ue"), "ue.energy_budget"),
            to_si(_require(u, "compute_power_draw", "ue"), "ue.compute_power_draw"),
            ProgramSpec(
                to_si(_require(prog, "data_size", "program"), "program.data_size"),
                to_si(_require(prog, "intensity", "program"), "program.intensity"),
                to_si(prog.get("k", 0.0), "program.k"),
                to_si(prog.get("b", 0.0), "program.b"),
            ),
        ))
    try:
        gains = tuple(tuple(float(g) for g in row) for row in gains_doc)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"gains: {exc}") from None
    seed = system.get("seed")
    return Scenario(
        servers, tuple(ues), gains,
        to_si(_require(system, "bandwidth", "system"), "system.bandwidth"),
        to_si(_require(system, "noise_density", "system"), "system.noise_density"),
        system.get("access_mode", NOMA),
        None if seed is None else int(seed),
    )


def save_scenario(scenario: Scenario) -> dict[str, Any]:
    """Serialize to a JSON-ready document with bare SI numbers."""
    return {
        "system": {
            "bandwidth": scenario.bandwidth,
            "noise_density": scenario.noise_density,
            "access_mode": scenario.access_mode,
            "seed": scenario.seed,
        },
        "servers": [
            {"id": s.id, "position": list(s.position), "compute_speed": s.compute_speed}
            for s in scenario.servers
        ],
        "ues": [
            {
                "id": u.id,
                "position": list(u.position),
                "compute_speed": u.compute_speed,
                "max_power": u.max_power,
                "energy_budget": u.energy_budget,
                "compute_power_draw": u.compute_power_draw,
                "program": {
                    "data_size": u.program.data_size,
                    "intensity": u.program.intensity,
                    "k": u.program.k,
                    "b": u.program.b,
                },
            }
            for u in scenario.ues
        ],
        "gains": [list(row) for row in scenario.gains],
    }


def read_scenario(path: str | Path) -> Scenario:
    with open(path) as fh:
        return load_scenario(json.load(fh))


def write_scenario(scenario: Scenario, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(save_scenario(scenario), fh, indent=2)
        fh.write("\n")
