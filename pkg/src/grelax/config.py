"""Run configuration: JSON schema, validation and object construction.

A config is one JSON object; unknown registry names, inconsistent grids and
a missing seed are rejected with a field-path diagnostic so the CLI can exit
with a usage error pointing at the offending entry.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .controls import ActionSet
from .costs import CostSpec
from .gheat import PdeGrid, extract_worst_case_scenario, padded_grid, solve_gheat
from .paths import TimeGrid
from .registry import COSTS, DYNAMICS, PAYOFFS, build_cost, build_dynamics, build_payoff
from .scenarios import ScenarioFamily, VolatilityBand, VolatilityScenario
from .sde import GsdeSpec

__all__ = ["ConfigError", "RunConfig", "load_config", "default_config_dict"]


class ConfigError(ValueError):
    """Invalid configuration; `field_path` names the offending entry."""

    def __init__(self, field_path: str, message: str):
        self.field_path = field_path
        super().__init__(f"{field_path}: {message}")


def default_config_dict() -> dict:
    """The shipped default experiment: the symmetric drift benchmark."""
    return {
        "experiment": "default",
        "band": {"sigma_min": 0.5, "sigma_max": 1.0},
        "scenarios": {
            "constant_levels": [0.5, 1.0],
            "deterministic_values": [],
            "include_worst_case_feedback": False,
        },
        "grid": {"T": 1.0, "n_steps": 12},
        "actions": [-1.0, 1.0],
        "dynamics": {"name": "bang_bang", "params": {"eps": 0.1}},
        "cost": {"name": "quadratic_state", "params": {}},
        "payoff": {"name": "square", "params": {}},
        "pde": {"nx": 400, "x_center": 0.0},
        "seed": 20240613,
        "m_paths": 4000,
        "n_list": [2, 4, 8, 16, 32],
        "budget": 4000,
        "out_dir": "runs/default",
        "dump_paths": 0,
    }


@dataclass(frozen=True)
class RunConfig:
    """Validated experiment description; see `default_config_dict` for the schema."""

    experiment: str
    band: VolatilityBand
    grid: TimeGrid
    actions: ActionSet
    seed: int
    m_paths: int
    n_list: tuple
    budget: int
    out_dir: str
    dump_paths: int
    dynamics_name: str
    dynamics_params: dict
    cost_name: str
    cost_params: dict
    payoff_name: str
    payoff_params: dict
    pde_nx: int
    pde_x_center: float
    constant_levels: tuple
    deterministic_values: tuple
    include_worst_case_feedback: bool

    def gsde_spec(self) -> GsdeSpec:
        return build_dynamics(self.dynamics_name, self.dynamics_params)

    def cost_spec(self) -> CostSpec:
        return build_cost(self.cost_name, self.cost_params)

    def payoff(self):
        return build_payoff(self.payoff_name, self.payoff_params)

    def pde_grid(self) -> PdeGrid:
        return padded_grid(self.pde_x_center, self.band, self.grid.T, self.pde_nx)

    def family(self, n_steps: Optional[int] = None) -> ScenarioFamily:
        """Build the scenario family on an n_steps grid (default: config grid).

        When the config requests the worst-case feedback scenario, it is
        extracted from the payoff's value surface on the config's space grid.
        """
        steps = n_steps if n_steps is not None else self.grid.n_steps
        scenarios = [
            VolatilityScenario.constant(level, steps, self.band)
            for level in self.constant_levels
        ]
        for i, values in enumerate(self.deterministic_values):
            scenarios.append(
                VolatilityScenario.deterministic(values, self.band, label=f"custom_{i}")
            )
        if self.include_worst_case_feedback:
            surface = solve_gheat(self.payoff(), self.band, self.pde_grid())
            scenarios.append(extract_worst_case_scenario(surface))
        return ScenarioFamily(
            band=self.band,
            scenarios=tuple(scenarios),
            includes_worst_case_feedback=self.include_worst_case_feedback,
        )


def _require(data: dict, key: str, path: str):
    if key not in data:
        raise ConfigError(f"{path}.{key}" if path else key, "missing required field")
    return data[key]


def parse_config(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a JSON object")

    band_data = _require(data, "band", "")
    try:
        band = VolatilityBand(
            sigma_min=float(_require(band_data, "sigma_min", "band")),
            sigma_max=float(_require(band_data, "sigma_max", "band")),
        )
    except ValueError as exc:
        raise ConfigError("band", str(exc)) from exc

    grid_data = _require(data, "grid", "")
    try:
        grid = TimeGrid(
            T=float(_require(grid_data, "T", "grid")),
            n_steps=int(_require(grid_data, "n_steps", "grid")),
        )
    except ValueError as exc:
        raise ConfigError("grid", str(exc)) from exc

    try:
        actions = ActionSet(tuple(_require(data, "actions", "")))
    except ValueError as exc:
        raise ConfigError("actions", str(exc)) from exc

    if "seed" not in data:
        raise ConfigError("seed", "missing required field (a seed is mandatory)")
    seed = int(data["seed"])

    m_paths = int(data.get("m_paths", 4000))
    if m_paths < 1:
        raise ConfigError("m_paths", f"must be >= 1, got {m_paths}")

    n_list = tuple(int(n) for n in data.get("n_list", (2, 4, 8, 16)))
    if any(n < 1 for n in n_list):
        raise ConfigError("n_list", f"entries must be >= 1, got {list(n_list)}")

    budget = int(data.get("budget", 4000))
    if budget < 1:
        raise ConfigError("budget", f"must be >= 1, got {budget}")

    dyn = data.get("dynamics", {"name": "bang_bang", "params": {}})
    dyn_name = _require(dyn, "name", "dynamics")
    if dyn_name not in DYNAMICS:
        raise ConfigError("dynamics.name", f"unknown family {dyn_name!r}; known: {sorted(DYNAMICS)}")

    cost = data.get("cost", {"name": "quadratic_state", "params": {}})
    cost_name = _require(cost, "name", "cost")
    if cost_name not in COSTS:
        raise ConfigError("cost.name", f"unknown family {cost_name!r}; known: {sorted(COSTS)}")

    payoff = data.get("payoff", {"name": "square", "params": {}})
    payoff_name = _require(payoff, "name", "payoff")
    if payoff_name not in PAYOFFS:
        raise ConfigError("payoff.name", f"unknown payoff {payoff_name!r}; known: {sorted(PAYOFFS)}")

    pde = data.get("pde", {})
    pde_nx = int(pde.get("nx", 400))
    if pde_nx < 2:
        raise ConfigError("pde.nx", f"must be >= 2, got {pde_nx}")

    scen = data.get("scenarios", {})
    levels = tuple(float(v) for v in scen.get("constant_levels", (band.sigma_min, band.sigma_max)))
    for i, level in enumerate(levels):
        if not band.sigma_min <= level <= band.sigma_max:
            raise ConfigError(
                f"scenarios.constant_levels[{i}]",
                f"level {level} outside band [{band.sigma_min}, {band.sigma_max}]",
            )
    det_values = []
    for i, values in enumerate(scen.get("deterministic_values", ())):
        arr = tuple(float(v) for v in values)
        if len(arr) != grid.n_steps:
            raise ConfigError(
                f"scenarios.deterministic_values[{i}]",
                f"needs {grid.n_steps} per-step values, got {len(arr)}",
            )
        if any(not band.sigma_min <= v <= band.sigma_max for v in arr):
            raise ConfigError(
                f"scenarios.deterministic_values[{i}]", "values outside the band"
            )
        det_values.append(arr)
    if len(levels) + len(det_values) == 0 and not scen.get("include_worst_case_feedback", False):
        raise ConfigError("scenarios", "family must contain at least one scenario")

    return RunConfig(
        experiment=str(data.get("experiment", "unnamed")),
        band=band,
        grid=grid,
        actions=actions,
        seed=seed,
        m_paths=m_paths,
        n_list=n_list,
        budget=budget,
        out_dir=str(data.get("out_dir", "runs/unnamed")),
        dump_paths=int(data.get("dump_paths", 0)),
        dynamics_name=dyn_name,
        dynamics_params=dict(dyn.get("params", {})),
        cost_name=cost_name,
        cost_params=dict(cost.get("params", {})),
        payoff_name=payoff_name,
        payoff_params=dict(payoff.get("params", {})),
        pde_nx=pde_nx,
        pde_x_center=float(pde.get("x_center", 0.0)),
        constant_levels=levels,
        deterministic_values=tuple(det_values),
        include_worst_case_feedback=bool(scen.get("include_worst_case_feedback", False)),
    )


def load_config(path: Optional[str]) -> RunConfig:
    """Parse a config file, or the shipped default when no path is given."""
    if path is None:
        return parse_config(default_config_dict())
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return parse_config(data)
