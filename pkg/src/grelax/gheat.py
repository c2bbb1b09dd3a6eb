"""Worst-case heat equation solver: the independent oracle for G-normal values.

Solves

    du/dt = g_operator(d2u/dx2),    u(0, x) = phi(x)

on a truncated interval by an explicit monotone finite-difference scheme:
central second differences, forward time stepping, and the worst-case
volatility chosen pointwise from the sign of the discrete curvature
(sigma_max where curvature >= 0, else sigma_min). u(t, x) is then the
worst-case expectation of phi evaluated at the noisy path started at x and
run for time t, and the recorded bang-bang choices form the worst-case
feedback policy.

The scheme is monotone iff dt <= dx^2 / sigma_max^2 (checked before
stepping); monotone schemes converge to the viscosity solution, which is the
meaning the equation has here. Boundary nodes use a zero-second-derivative
(linear extrapolation) closure, so they stay at their initial values; callers
must pad the domain so the region of interest sits at least
~6 * sigma_max * sqrt(T) away from the edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .scenarios import VolatilityBand, VolatilityScenario, g_operator_array

__all__ = [
    "PdeGrid",
    "ValueSurface",
    "solve_gheat",
    "gnormal_expectation",
    "extract_worst_case_scenario",
    "padded_grid",
]


@dataclass(frozen=True)
class PdeGrid:
    """Space-time grid for the solver: [x_min, x_max] x [0, T]."""

    x_min: float
    x_max: float
    nx: int
    T: float
    nt: int

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValueError(f"need x_min < x_max, got [{self.x_min}, {self.x_max}]")
        if self.nx < 2 or self.nt < 1:
            raise ValueError(f"need nx >= 2 and nt >= 1, got nx={self.nx}, nt={self.nt}")
        if not self.T > 0:
            raise ValueError(f"horizon must be positive, got T={self.T}")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.nx

    @property
    def dt(self) -> float:
        return self.T / self.nt

    @property
    def x_nodes(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx + 1)

    @property
    def t_nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.nt + 1)

    def is_stable(self, band: VolatilityBand) -> bool:
        # allow a 1-ulp-ish slack so nt chosen from the formula passes its own check
        return self.dt <= self.dx**2 / band.sigma_max**2 * (1.0 + 1e-12)


def padded_grid(
    x_center: float,
    band: VolatilityBand,
    T: float,
    nx: int,
    half_width: Optional[float] = None,
) -> PdeGrid:
    """Stable grid centred at x_center with the default padding heuristic.

    The half-width defaults to 6 * sigma_max * sqrt(T), far enough that the
    frozen boundary values cannot reach the centre; nt is the smallest count
    satisfying the stability bound.
    """
    if half_width is None:
        half_width = 6.0 * band.sigma_max * math.sqrt(T)
    x_min = x_center - half_width
    x_max = x_center + half_width
    dx = (x_max - x_min) / nx
    nt = max(1, math.ceil(T * band.sigma_max**2 / dx**2))
    return PdeGrid(x_min=x_min, x_max=x_max, nx=nx, T=T, nt=nt)


@dataclass(frozen=True, eq=False)
class ValueSurface:
    """Solution values and the bang-bang volatility choices that produced them.

    values[k, i] approximates u(k * dt, x_i); feedback[k, i] is the volatility
    used when stepping from time level k (sigma_max on curvature >= 0, else
    sigma_min). Row 0 of values is the sampled initial payoff.
    """

    grid: PdeGrid
    band: VolatilityBand
    values: np.ndarray
    feedback: np.ndarray

    def interpolate(self, t: float, x: float) -> float:
        """Bilinear interpolation of the value surface at (t, x)."""
        g = self.grid
        if not (0.0 <= t <= g.T * (1 + 1e-12)):
            raise ValueError(f"t={t} outside [0, {g.T}]")
        if not (g.x_min <= x <= g.x_max):
            raise ValueError(f"x={x} outside [{g.x_min}, {g.x_max}]")
        ft = min(t / g.dt, g.nt - 1e-12) if g.nt > 0 else 0.0
        fx = min((x - g.x_min) / g.dx, g.nx - 1e-12)
        k, i = int(ft), int(fx)
        wt, wx = ft - k, fx - i
        v = self.values
        return float(
            (1 - wt) * ((1 - wx) * v[k, i] + wx * v[k, i + 1])
            + wt * ((1 - wx) * v[k + 1, i] + wx * v[k + 1, i + 1])
        )


def solve_gheat(phi: Callable[[np.ndarray], np.ndarray], band: VolatilityBand, grid: PdeGrid) -> ValueSurface:
    """Run the explicit monotone scheme from the sampled payoff.

    phi must be finite on the grid (declared bounded Lipschitz by the caller).
    Raises "unstable grid" when dt exceeds the monotonicity bound and
    "bad payoff" on non-finite samples.
    """
    if not grid.is_stable(band):
        raise ValueError(
            f"unstable grid: dt={grid.dt:.3e} > dx^2/sigma_max^2="
            f"{grid.dx**2 / band.sigma_max**2:.3e}"
        )
    x = grid.x_nodes
    u0 = np.asarray(phi(x), dtype=float)
    if u0.shape != x.shape or not np.all(np.isfinite(u0)):
        raise ValueError("bad payoff: must be finite at every grid node")

    values = np.empty((grid.nt + 1, grid.nx + 1), dtype=float)
    feedback = np.empty((grid.nt, grid.nx + 1), dtype=float)
    values[0] = u0
    dt = grid.dt
    inv_dx2 = 1.0 / grid.dx**2
    curv = np.zeros(grid.nx + 1, dtype=float)
    for k in range(grid.nt):
        u = values[k]
        # zero second derivative at both ends: boundary nodes never move
        curv[1:-1] = (u[2:] - 2.0 * u[1:-1] + u[:-2]) * inv_dx2
        curv[0] = 0.0
        curv[-1] = 0.0
        values[k + 1] = u + dt * g_operator_array(curv, band)
        feedback[k] = np.where(curv >= 0.0, band.sigma_max, band.sigma_min)
    values.setflags(write=False)
    feedback.setflags(write=False)
    return ValueSurface(grid=grid, band=band, values=values, feedback=feedback)


def gnormal_expectation(
    phi: Callable[[np.ndarray], np.ndarray],
    t: float,
    x: float,
    band: VolatilityBand,
    grid: PdeGrid,
) -> float:
    """Worst-case expectation of phi(x + path over time t), via the surface."""
    surface = solve_gheat(phi, band, grid)
    return surface.interpolate(t, x)


def extract_worst_case_scenario(
    surface: ValueSurface,
    sde_map: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    label: str = "worst_case_feedback",
) -> VolatilityScenario:
    """Repackage the recorded bang-bang choices as a simulatable feedback policy.

    The solver's time variable is time-to-go, so the policy rows are reversed
    into forward simulation time: the policy on simulation interval
    [r*dt, (r+1)*dt) is the choice the solver made when the remaining time was
    in (T-(r+1)*dt, T-r*dt]. `sde_map` optionally converts simulation states
    to the solver's space coordinate before table lookup.
    """
    table = surface.feedback[::-1].copy()
    return VolatilityScenario.feedback(
        table=table,
        x_grid=surface.grid.x_nodes,
        horizon=surface.grid.T,
        band=surface.band,
        label=label,
        state_map=sde_map,
    )
