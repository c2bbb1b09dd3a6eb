"""Volatility uncertainty sets, scenario families and worst-case reductions.

Volatility is only known to live in a band [sigma_min, sigma_max]. A scenario
pins it down: either a deterministic per-step value sequence, or a feedback
policy tabulated over (time, state) cells. A finite ordered family of
scenarios stands in for the full (infinite) set of candidate laws; taking the
maximum of per-scenario Monte-Carlo estimates computed on common random
numbers gives a worst-case (sublinear) expectation estimator that satisfies
the sublinear-expectation axioms exactly, and a certified lower bound for the
true worst case.

The worst-case quadratic-coefficient functional

    g_operator(a) = (1/2) * max over sigma in band of sigma^2 * a
                  = (1/2) * (sigma_max^2 * a_plus - sigma_min^2 * a_minus)

is the nonlinearity of the companion parabolic equation solved in `gheat`;
its pointwise maximiser (sigma_max where a >= 0, else sigma_min) is what the
feedback scenarios tabulate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

__all__ = [
    "VolatilityBand",
    "VolatilityScenario",
    "ScenarioFamily",
    "SublinearEstimate",
    "g_operator",
    "sublinear_expectation",
    "capacity_estimate",
]


@dataclass(frozen=True)
class VolatilityBand:
    """Closed volatility interval 0 < sigma_min <= sigma_max (per sqrt(time))."""

    sigma_min: float
    sigma_max: float

    def __post_init__(self):
        if not (0.0 < self.sigma_min <= self.sigma_max):
            raise ValueError(
                f"band requires 0 < sigma_min <= sigma_max, got "
                f"({self.sigma_min}, {self.sigma_max})"
            )

    @property
    def is_singleton(self) -> bool:
        return self.sigma_min == self.sigma_max

    def contains(self, sigma) -> bool:
        arr = np.asarray(sigma, dtype=float)
        tol = 1e-12 * max(1.0, self.sigma_max)
        return bool(np.all(arr >= self.sigma_min - tol) and np.all(arr <= self.sigma_max + tol))


def g_operator(a: float, band: VolatilityBand) -> float:
    """Worst-case half-weighted quadratic coefficient over the band.

    Returns (1/2) * (sigma_max^2 * max(a, 0) - sigma_min^2 * max(-a, 0)),
    the supremum over sigma in the band of sigma^2 * a / 2. Positively
    homogeneous and nondecreasing in a; zero at a = 0.
    """
    a_plus = max(a, 0.0)
    a_minus = max(-a, 0.0)
    return 0.5 * (band.sigma_max**2 * a_plus - band.sigma_min**2 * a_minus)


def g_operator_array(a: np.ndarray, band: VolatilityBand) -> np.ndarray:
    """Vectorised `g_operator` (used by the PDE time stepper)."""
    a_plus = np.maximum(a, 0.0)
    a_minus = np.maximum(-a, 0.0)
    return 0.5 * (band.sigma_max**2 * a_plus - band.sigma_min**2 * a_minus)


@dataclass(frozen=True, eq=False)
class VolatilityScenario:
    """One admissible volatility policy; induces one candidate law of the path.

    kind "deterministic": `values` holds one volatility per step of the owning
    time grid. kind "feedback": `table` (n_rows, n_cells) tabulates sigma over
    uniform time rows on [0, horizon] and the state cells of `x_grid`;
    evaluation picks the row containing t and the nearest state node. An
    optional `state_map` converts a simulation state to the tabulation
    coordinate before lookup.
    """

    kind: str
    band: VolatilityBand
    label: str = ""
    values: Optional[np.ndarray] = None
    table: Optional[np.ndarray] = None
    x_grid: Optional[np.ndarray] = None
    horizon: Optional[float] = None
    state_map: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.kind == "deterministic":
            if self.values is None or len(self.values) < 1:
                raise ValueError("deterministic scenario needs one value per step")
            if not self.band.contains(self.values):
                raise ValueError(
                    f"scenario out of band: values in "
                    f"[{np.min(self.values)}, {np.max(self.values)}] vs "
                    f"[{self.band.sigma_min}, {self.band.sigma_max}]"
                )
        elif self.kind == "feedback":
            if self.table is None or self.x_grid is None or self.horizon is None:
                raise ValueError("feedback scenario needs table, x_grid and horizon")
            if self.table.ndim != 2 or self.table.shape[1] != len(self.x_grid):
                raise ValueError(
                    f"feedback table shape {self.table.shape} does not match "
                    f"x_grid of length {len(self.x_grid)}"
                )
            if not self.horizon > 0:
                raise ValueError("feedback horizon must be positive")
            if not self.band.contains(self.table):
                raise ValueError("scenario out of band: feedback table exceeds band")
        else:
            raise ValueError(f"unknown scenario kind {self.kind!r}")

    @staticmethod
    def constant(level: float, n_steps: int, band: VolatilityBand, label: str = "") -> "VolatilityScenario":
        values = np.full(n_steps, float(level))
        values.setflags(write=False)
        return VolatilityScenario(
            kind="deterministic",
            band=band,
            label=label or f"const_{level:g}",
            values=values,
        )

    @staticmethod
    def deterministic(values: Sequence[float], band: VolatilityBand, label: str = "") -> "VolatilityScenario":
        arr = np.asarray(values, dtype=float).copy()
        arr.setflags(write=False)
        return VolatilityScenario(kind="deterministic", band=band, label=label or "deterministic", values=arr)

    @staticmethod
    def feedback(
        table: np.ndarray,
        x_grid: np.ndarray,
        horizon: float,
        band: VolatilityBand,
        label: str = "feedback",
        state_map: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    ) -> "VolatilityScenario":
        tab = np.asarray(table, dtype=float).copy()
        xg = np.asarray(x_grid, dtype=float).copy()
        tab.setflags(write=False)
        xg.setflags(write=False)
        return VolatilityScenario(
            kind="feedback",
            band=band,
            label=label,
            table=tab,
            x_grid=xg,
            horizon=float(horizon),
            state_map=state_map,
        )

    @property
    def n_steps(self) -> Optional[int]:
        return len(self.values) if self.kind == "deterministic" else None

    def sigma_at(self, t: float, state: np.ndarray) -> np.ndarray:
        """Volatility at time t for the given state vector (feedback scenarios)."""
        if self.kind != "feedback":
            raise ValueError("sigma_at is defined for feedback scenarios only")
        n_rows = self.table.shape[0]
        row_dt = self.horizon / n_rows
        row = min(int(t / row_dt), n_rows - 1) if t > 0 else 0
        x = np.asarray(state, dtype=float)
        if self.state_map is not None:
            x = np.asarray(self.state_map(x), dtype=float)
        x0 = self.x_grid[0]
        dx = self.x_grid[1] - self.x_grid[0] if len(self.x_grid) > 1 else 1.0
        cols = np.clip(np.rint((x - x0) / dx).astype(int), 0, len(self.x_grid) - 1)
        return self.table[row, cols]


@dataclass(frozen=True, eq=False)
class ScenarioFamily:
    """Ordered finite surrogate for the candidate-law set.

    The order is part of the value: every worst-case reduction scans scenarios
    in this order and resolves ties at the first attaining index, so results
    are reproducible for a given seed and path count. All deterministic
    members must share one time grid.
    """

    band: VolatilityBand
    scenarios: tuple
    includes_worst_case_feedback: bool = False

    def __post_init__(self):
        if len(self.scenarios) == 0:
            raise ValueError("empty family")
        object.__setattr__(self, "scenarios", tuple(self.scenarios))
        steps = {s.n_steps for s in self.scenarios if s.kind == "deterministic"}
        if len(steps) > 1:
            raise ValueError(f"scenarios disagree on the time grid: {sorted(steps)} steps")
        for s in self.scenarios:
            if (s.band.sigma_min, s.band.sigma_max) != (self.band.sigma_min, self.band.sigma_max):
                raise ValueError("scenario band differs from family band")

    @staticmethod
    def from_levels(
        levels: Sequence[float],
        n_steps: int,
        band: VolatilityBand,
        extra: Sequence[VolatilityScenario] = (),
        includes_worst_case_feedback: bool = False,
    ) -> "ScenarioFamily":
        scenarios = [VolatilityScenario.constant(lv, n_steps, band) for lv in levels]
        scenarios.extend(extra)
        return ScenarioFamily(
            band=band,
            scenarios=tuple(scenarios),
            includes_worst_case_feedback=includes_worst_case_feedback,
        )

    def __len__(self) -> int:
        return len(self.scenarios)

    @property
    def labels(self) -> list[str]:
        return [s.label for s in self.scenarios]


class SublinearEstimate(NamedTuple):
    value: float
    argmax: int


def sublinear_expectation(per_scenario_estimates: Sequence) -> SublinearEstimate:
    """Worst case over the family: maximum estimate and first attaining index.

    Pure-Python reduction so it works unchanged on floats and on exact
    rational estimates; the scan order is the fixed scenario order.
    """
    estimates = list(per_scenario_estimates)
    if len(estimates) == 0:
        raise ValueError("empty family")
    best = estimates[0]
    best_idx = 0
    for idx, value in enumerate(estimates[1:], start=1):
        if value > best:
            best = value
            best_idx = idx
    return SublinearEstimate(value=best, argmax=best_idx)


def capacity_estimate(event, family: ScenarioFamily, noise) -> float:
    """Worst-case probability estimate of a path event.

    `event` maps a GPathSet to a boolean per path; the estimate is the
    maximum over scenarios of the empirical fraction, computed on the common
    noise. Always in [0, 1]; 0 for empty events on every scenario flags the
    event as negligible under the whole family.
    """
    from .paths import generate_gbm  # deferred: paths depends on this module

    if noise.m_paths < 1:
        raise ValueError("no paths")
    fractions: list[float] = []
    for scenario in family.scenarios:
        paths = generate_gbm(noise, scenario)
        indicator = np.asarray(event(paths))
        if indicator.shape != (noise.m_paths,):
            raise ValueError(
                f"event must return one boolean per path, got shape {indicator.shape}"
            )
        fractions.append(float(np.count_nonzero(indicator)) / noise.m_paths)
    return sublinear_expectation(fractions).value
