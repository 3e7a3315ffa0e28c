"""Experiment configs, parameter sweeps and CSV/JSON reporting."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .baselines import InstanceTooLarge, MethodSpec, run_method
from .report import SolutionReport
from .scenario import (NOMA, Scenario, ScenarioError, ScenarioParams, generate_scenario,
                       read_scenario, to_si)

SWEEP_AXES = ("none", "bandwidth", "ue_count", "server_count", "max_power",
              "ue_speed", "server_speed")
CSV_COLUMNS = ("sweep_value", "method", "access", "seeds", "mean_makespan_s",
               "std_makespan_s", "mean_phi_s", "mean_iters")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


def method_label(spec: MethodSpec) -> str:
    return f"ga-{spec.iterations}" if spec.tag == "ga" else spec.tag


@dataclass(frozen=True)
class ExperimentConfig:
    methods: tuple[MethodSpec, ...] = (MethodSpec(),)
    servers: int = 2
    ues: int = 10
    params: ScenarioParams = field(default_factory=ScenarioParams)
    scenario_file: str | None = None
    sweep_axis: str = "none"
    sweep_values: tuple[float, ...] = ()
    repetitions: int = 1
    base_seed: int = 0
    output: str | None = None

    def __post_init__(self):
        if self.sweep_axis not in SWEEP_AXES:
            raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if not self.methods:
            raise ConfigError("at least one method is required")
        if self.sweep_axis != "none":
            if not self.sweep_values:
                raise ConfigError("a sweep needs values")
            if any(b <= a for a, b in zip(self.sweep_values, self.sweep_values[1:])):
                raise ConfigError("sweep values must be strictly increasing")
        if self.scenario_file and self.sweep_axis not in ("none", "bandwidth"):
            raise ConfigError("file scenarios can only sweep bandwidth")

    def points(self) -> list[float | None]:
        return [None] if self.sweep_axis == "none" else list(self.sweep_values)

    def seeds(self) -> list[int]:
        return [self.base_seed + r for r in range(self.repetitions)]


def _method_from(doc: Mapping[str, Any]) -> MethodSpec:
    allowed = {"tag", "access", "epsilon", "max_iter", "population", "iterations",
               "ga_seed", "es_grid"}
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown method fields {sorted(unknown)}")
    try:
        return MethodSpec(**doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


_PARAM_FIELDS = {"data_size", "intensity", "max_power", "energy_budget", "compute_power_draw",
                 "ue_speed", "server_speed", "noise_density", "bandwidth", "k", "b", "area",
                 "path_loss_exponent", "min_distance", "access_mode", "server_positions"}


def _params_from(doc: Mapping[str, Any]) -> ScenarioParams:
    unknown = set(doc) - _PARAM_FIELDS
    if unknown:
        raise ConfigError(f"unknown scenario parameters {sorted(unknown)}")
    out = {}
    for key, val in doc.items():
        if key in ("access_mode",):
            out[key] = val
        elif key == "server_positions":
            out[key] = tuple(tuple(map(float, xy)) for xy in val)
        elif isinstance(val, list):
            out[key] = tuple(to_si(v, key) for v in val)
        else:
            out[key] = to_si(val, key)
    try:
        return ScenarioParams().updated(**out)
    except ScenarioError as exc:
        raise ConfigError(str(exc)) from exc


def config_from_dict(doc: Mapping[str, Any], base_dir: Path | None = None) -> ExperimentConfig:
    """Build a config from its JSON form.

    Example::

        {"scenario": {"servers": 2, "ues": 10, "params": {"bandwidth": {"value": 20, "unit": "MHz"}}},
         "methods": [{"tag": "ppo"}, {"tag": "fpo"}],
         "sweep": {"axis": "bandwidth", "values": [4, 10, 20, 40], "unit": "MHz"},
         "repetitions": 20, "base_seed": 0}
    """
    known = {"scenario", "method", "methods", "sweep", "repetitions", "base_seed", "output"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    sc = doc.get("scenario", {})
    methods = doc.get("methods")
    if methods is None:
        methods = [doc.get("method", {"tag": "ppo"})]
    sweep = doc.get("sweep", {"axis": "none"})
    axis = sweep.get("axis", "none")
    unit = sweep.get("unit")
    values = tuple(to_si({"value": v, "unit": unit} if unit else v, axis)
                   for v in sweep.get("values", ()))
    scenario_file = sc.get("file")
    if scenario_file and base_dir is not None and not Path(scenario_file).is_absolute():
        scenario_file = str(base_dir / scenario_file)
    try:
        return ExperimentConfig(
            methods=tuple(_method_from(m) for m in methods),
            servers=int(sc.get("servers", 2)),
            ues=int(sc.get("ues", 10)),
            params=_params_from(sc.get("params", {})),
            scenario_file=scenario_file,
            sweep_axis=axis,
            sweep_values=values,
            repetitions=int(doc.get("repetitions", 1)),
            base_seed=int(doc.get("base_seed", 0)),
            output=doc.get("output"),
        )
    except (TypeError, ScenarioError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(doc, path.parent)


def _point_setup(config: ExperimentConfig, value) -> tuple[ScenarioParams, int, int]:
    p, servers, ues = config.params, config.servers, config.ues
    axis = config.sweep_axis
    if axis == "bandwidth":
        p = p.updated(bandwidth=float(value))
    elif axis == "ue_count":
        ues = int(value)
    elif axis == "server_count":
        servers = int(value)
    elif axis == "max_power":
        p = p.updated(max_power=float(value))
    elif axis == "ue_speed":
        p = p.updated(ue_speed=float(value))
    elif axis == "server_speed":
        p = p.updated(server_speed=float(value))
    return p, servers, ues


def build_scenario(config: ExperimentConfig, value, seed: int) -> Scenario:
    if config.scenario_file:
        sc = read_scenario(config.scenario_file)
        sc = replace(sc, seed=seed)
        if config.sweep_axis == "bandwidth":
            sc = replace(sc, bandwidth=float(value))
        return sc
    p, servers, ues = _point_setup(config, value)
    return generate_scenario(seed, servers, ues, p)


@dataclass
class Cell:
    sweep_value: float | None
    method: str
    access: str
    seed: int
    report: SolutionReport


def run_experiment(config: ExperimentConfig) -> list[Cell]:
    """Every (sweep point, method, seed) cell, in a fixed order."""
    cells = []
    for value in config.points():
        for seed in config.seeds():
            scenario = build_scenario(config, value, seed)
            for spec in config.methods:
                report = run_method(scenario, spec)
                cells.append(Cell(value, method_label(spec), spec.access, seed, report))
    return cells


def aggregate(cells: Sequence[Cell]) -> list[dict]:
    """One row per (sweep point, method, access); std uses the population formula."""
    groups: dict[tuple, list[Cell]] = {}
    for c in cells:
        groups.setdefault((c.sweep_value, c.method, c.access), []).append(c)
    rows = []
    for (value, method, access), cs in groups.items():
        g = np.array([c.report.makespan for c in cs])
        rows.append({
            "sweep_value": "" if value is None else value,
            "method": method,
            "access": access,
            "seeds": len(cs),
            "mean_makespan_s": float(g.mean()),
            "std_makespan_s": float(g.std()),
            "mean_phi_s": float(np.mean([c.report.phi for c in cs])),
            "mean_iters": float(np.mean([c.report.iterations for c in cs])),
        })
    return rows


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def rows_to_csv(rows: Sequence[Mapping[str, Any]], columns=CSV_COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def details_document(config: ExperimentConfig, cells: Sequence[Cell]) -> dict:
    return {
        "sweep_axis": config.sweep_axis,
        "runs": [{"sweep_value": c.sweep_value, "method": c.method, "access": c.access,
                  "seed": c.seed, "report": c.report.to_dict()} for c in cells],
    }


def write_results(config: ExperimentConfig, cells: Sequence[Cell], out_dir: str | Path):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "results.csv").write_text(rows_to_csv(aggregate(cells)))
    (out / "details.json").write_text(json.dumps(details_document(config, cells), indent=1))
    return out / "results.csv", out / "details.json"


def comparison_table(configs: Sequence[ExperimentConfig],
                     results: Sequence[Sequence[Cell]]) -> tuple[list[str], list[list]]:
    """Mean makespan per sweep point, one column per (method, access)."""
    if len(configs) < 2:
        raise ConfigError("compare needs at least two configs")
    ref = configs[0]
    for c in configs[1:]:
        if c.sweep_axis != ref.sweep_axis or c.points() != ref.points():
            raise ConfigError("configs must share the sweep axis and values")
        if c.seeds() != ref.seeds():
            raise ConfigError("configs must share the seeds")
    header = ["sweep_value"]
    columns = {}
    for cells in results:
        for row in aggregate(cells):
            name = row["method"] if row["access"] == NOMA else f"{row['method']}/{row['access']}"
            if name not in columns:
                header.append(name)
                columns[name] = {}
            columns[name][row["sweep_value"]] = row["mean_makespan_s"]
    table = []
    for value in ref.points():
        key = "" if value is None else value
        table.append([key] + [columns[name].get(key, math.nan) for name in header[1:]])
    return header, table


def table_to_csv(header, table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in table:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _mhz(values):
    return tuple(v * 1e6 for v in values)


def preset(name: str, repetitions: int = 20) -> ExperimentConfig:
    """Standard sweep layouts, sized to run on a desktop."""
    fixed = ScenarioParams().updated(ue_speed=2e9, server_speed=600e9, max_power=0.2)
    four = ("ppo", "fpo", "hpo", "zpo")
    if name == "fig6":
        return ExperimentConfig(
            methods=(MethodSpec("es"), MethodSpec("ppo"), MethodSpec("ga", iterations=500),
                     MethodSpec("ga", iterations=2000), MethodSpec("preinstalled")),
            servers=2, ues=4, sweep_axis="ue_count", sweep_values=(4, 6, 8, 10, 12),
            repetitions=repetitions)
    if name == "fig12":
        return ExperimentConfig(
            methods=tuple(MethodSpec(t) for t in four), servers=4, ues=40, params=fixed,
            sweep_axis="bandwidth", sweep_values=_mhz((4, 10, 20, 30, 40)),
            repetitions=repetitions)
    if name == "fig13":
        return ExperimentConfig(
            methods=(MethodSpec("ppo"), MethodSpec("ppo", access="tdma")), servers=4, ues=40,
            params=fixed.updated(bandwidth=20e6), sweep_axis="max_power",
            sweep_values=(0.1, 0.15, 0.2, 0.25), repetitions=repetitions)
    if name == "fig14":
        return ExperimentConfig(
            methods=tuple(MethodSpec(t) for t in four), servers=4, ues=40, params=fixed,
            sweep_axis="ue_speed", sweep_values=(1.2e9, 2e9, 3e9, 4e9), repetitions=repetitions)
    if name == "fig15":
        return ExperimentConfig(
            methods=tuple(MethodSpec(t) for t in four), servers=4, ues=40, params=fixed,
            sweep_axis="server_speed", sweep_values=(500e9, 550e9, 600e9, 650e9),
            repetitions=repetitions)
    raise ConfigError(f"unknown preset {name!r}")


PRESETS = ("fig6", "fig12", "fig13", "fig14", "fig15")

__all__ = ["ExperimentConfig", "ConfigError", "InstanceTooLarge", "run_experiment",
           "aggregate", "write_results", "comparison_table", "preset", "PRESETS"]
