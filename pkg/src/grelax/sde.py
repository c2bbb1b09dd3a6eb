"""Euler scheme for controlled dynamics driven by scenario paths.

State evolution per path, with all coefficients evaluated at step start:

    x_{k+1} = x_k + sigma(t_k, x_k) * dB_k
                  + [sum_a w_k(a) b(t_k, x_k, a)] * dt
                  + [sum_a w_k(a) gamma(t_k, x_k, a)] * d<B>_k

where w_k is the relaxed control's row (one-hot for strict controls) and
dB, d<B> come from a GPathSet. Coefficients declare a uniform bound and a
Lipschitz constant; the bound is asserted on every evaluation, the Lipschitz
constant is the caller's declaration (it cannot be observed pointwise).

Coefficient callables must accept numpy arrays for the state argument.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .controls import RelaxedControl, StrictControl, chatter, embed_strict, resample
from .paths import GPathSet
from .scenarios import sublinear_expectation

__all__ = [
    "GsdeSpec",
    "StatePathSet",
    "solve_relaxed",
    "solve_strict",
    "stability_gap",
    "StabilityRow",
]


@dataclass(frozen=True)
class GsdeSpec:
    """Coefficient triple (drift, diffusion, qv-drift) with declared bounds.

    drift(t, x, a) and qv_drift(t, x, a) see the action; diffusion(t, x) does
    not. `declared_bound` is asserted against |value| on every evaluation;
    `declared_lipschitz` documents the x-Lipschitz constant, uniform in
    (t, a).
    """

    drift: Callable
    diffusion: Callable
    qv_drift: Callable
    x0: float
    declared_bound: float
    declared_lipschitz: float

    def __post_init__(self):
        if not self.declared_bound > 0:
            raise ValueError("declared_bound must be positive")
        if self.declared_lipschitz < 0:
            raise ValueError("declared_lipschitz must be nonnegative")


def _checked(values: np.ndarray, bound: float, name: str) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    worst = float(np.max(np.abs(values))) if values.size else 0.0
    if not np.isfinite(worst) or worst > bound * (1.0 + 1e-12):
        raise ValueError(
            f"H1 violated: |{name}| reached {worst}, declared bound {bound}"
        )
    return values


@dataclass(frozen=True, eq=False)
class StatePathSet:
    """Solution paths (m_paths, n_steps + 1); column 0 is x0 on every path."""

    spec: GsdeSpec
    control: RelaxedControl
    paths: GPathSet
    x_paths: np.ndarray

    @property
    def terminal(self) -> np.ndarray:
        return self.x_paths[:, -1]


def solve_relaxed(spec: GsdeSpec, mu: RelaxedControl, paths: GPathSet) -> StatePathSet:
    """Integrate the weighted dynamics along every path of the scenario."""
    grid = paths.grid
    if not mu.grid.matches(grid):
        raise ValueError(
            f"grid mismatch: control has {mu.grid.n_steps} steps over T={mu.grid.T}, "
            f"paths have {grid.n_steps} over T={grid.T}"
        )
    m, n = paths.m_paths, grid.n_steps
    dt = grid.dt
    acts = mu.actions.values()
    db = paths.b_increments()
    dqv = paths.qv_increments()
    bound = spec.declared_bound

    x = np.empty((m, n + 1), dtype=float)
    x[:, 0] = spec.x0
    t_nodes = grid.nodes
    ones = np.ones(m)
    for k in range(n):
        xk = x[:, k]
        t_k = t_nodes[k]
        row = mu.weights[k]
        sig = _checked(spec.diffusion(t_k, xk), bound, "sigma") * ones
        drift = np.zeros(m)
        qv_drift = np.zeros(m)
        for a_idx, w in enumerate(row):
            if w == 0.0:
                continue
            a = acts[a_idx]
            drift = drift + w * (_checked(spec.drift(t_k, xk, a), bound, "b") * ones)
            qv_drift = qv_drift + w * (_checked(spec.qv_drift(t_k, xk, a), bound, "gamma") * ones)
        x[:, k + 1] = xk + sig * db[:, k] + drift * dt + qv_drift * dqv[:, k]
    x.setflags(write=False)
    return StatePathSet(spec=spec, control=mu, paths=paths, x_paths=x)


def solve_strict(spec: GsdeSpec, u: StrictControl, paths: GPathSet) -> StatePathSet:
    """Strict-control solve; definitionally the relaxed solve of the embedding."""
    return solve_relaxed(spec, embed_strict(u), paths)


@dataclass(frozen=True)
class StabilityRow:
    n: int
    gap: float
    se: float
    per_scenario: tuple


def stability_gap(
    spec: GsdeSpec,
    mu: RelaxedControl,
    n_list: Sequence[int],
    path_sets: Sequence[GPathSet],
) -> list[StabilityRow]:
    """Worst-case mean of sup_t |x^{chatter(mu, n)} - x^mu|^2, per block count n.

    All solves run on the supplied per-scenario path sets, which must share
    one noise bundle and one refined grid; mu is lifted to that grid. The
    reported standard error is the attaining scenario's.
    """
    if len(path_sets) == 0:
        raise ValueError("empty family")
    grid = path_sets[0].grid
    for ps in path_sets[1:]:
        if not ps.grid.matches(grid) or ps.noise is not path_sets[0].noise:
            raise ValueError("path sets must share one noise bundle and grid")
    mu_ref = resample(mu, grid)
    ref_solutions = [solve_relaxed(spec, mu_ref, ps) for ps in path_sets]

    rows: list[StabilityRow] = []
    for n in n_list:
        u_n = chatter(mu, n, refined_steps=grid.n_steps)
        means: list[float] = []
        ses: list[float] = []
        for ps, ref in zip(path_sets, ref_solutions):
            x_n = solve_strict(spec, u_n, ps)
            sup_sq = np.max(np.square(x_n.x_paths - ref.x_paths), axis=1)
            means.append(float(np.mean(sup_sq)))
            m = sup_sq.shape[0]
            ses.append(float(np.std(sup_sq, ddof=1) / np.sqrt(m)) if m > 1 else 0.0)
        est = sublinear_expectation(means)
        rows.append(
            StabilityRow(n=int(n), gap=est.value, se=ses[est.argmax], per_scenario=tuple(means))
        )
    return rows
