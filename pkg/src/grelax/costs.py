"""Running-plus-terminal costs and their worst case over a scenario family.

The per-path payoff of a relaxed control is

    chi = sum_k [sum_a w_k(a) f(t_k, x_k, a)] * dt + h(x_T)

(left endpoints, consistent with the state scheme). Averaging chi over the
paths of one scenario gives that scenario's cost estimate; the robust cost is
the maximum over the family, computed on common random numbers so that the
worst-case functional inherits the sublinear-expectation axioms exactly at
the estimate level. The reported standard error of a maximum is the
attaining scenario's standard error.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .controls import RelaxedControl, StrictControl, chatter, embed_strict, resample
from .paths import GPathSet, NoiseBundle, generate_gbm
from .scenarios import ScenarioFamily, VolatilityScenario, sublinear_expectation
from .sde import GsdeSpec, StatePathSet, solve_relaxed

__all__ = [
    "CostSpec",
    "CostEstimate",
    "chi",
    "cost_under_scenario",
    "cost_on_paths",
    "robust_cost",
    "robust_cost_on_paths",
    "cost_stability_study",
    "CostStabilityRow",
]


@dataclass(frozen=True)
class CostSpec:
    """Running cost f(t, x, a) and terminal cost h(x) with a declared bound."""

    running: Callable
    terminal: Callable
    declared_bound: float

    def __post_init__(self):
        if not self.declared_bound > 0:
            raise ValueError("declared_bound must be positive")


def _checked(values, bound: float, name: str) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    worst = float(np.max(np.abs(values))) if values.size else 0.0
    if not np.isfinite(worst) or worst > bound * (1.0 + 1e-12):
        raise ValueError(
            f"H2 violated: |{name}| reached {worst}, declared bound {bound}"
        )
    return values


def chi(spec: CostSpec, mu: RelaxedControl, states: StatePathSet) -> np.ndarray:
    """Per-path cost of the control along the solved states."""
    grid = states.paths.grid
    if not mu.grid.matches(grid):
        raise ValueError("grid mismatch between control and states")
    m = states.x_paths.shape[0]
    dt = grid.dt
    acts = mu.actions.values()
    t_nodes = grid.nodes
    bound = spec.declared_bound
    running = np.zeros(m)
    ones = np.ones(m)
    for k in range(grid.n_steps):
        xk = states.x_paths[:, k]
        row = mu.weights[k]
        inner = np.zeros(m)
        for a_idx, w in enumerate(row):
            if w == 0.0:
                continue
            inner = inner + w * (_checked(spec.running(t_nodes[k], xk, acts[a_idx]), bound, "f") * ones)
        running = running + inner * dt
    terminal = _checked(spec.terminal(states.x_paths[:, -1]), bound, "h") * ones
    total = running + terminal
    cap = bound * (grid.T + 1.0) * (1.0 + 1e-9)
    worst = float(np.max(np.abs(total)))
    if worst > cap:  # cannot happen when the pointwise checks pass
        raise ValueError(f"H2 violated: |chi| reached {worst}, cap {cap}")
    return total


class CostEstimate(NamedTuple):
    value: float
    se: float


def cost_on_paths(
    cost_spec: CostSpec,
    gsde_spec: GsdeSpec,
    mu: RelaxedControl,
    paths: GPathSet,
) -> CostEstimate:
    """Cost estimate of mu on an already-generated scenario path set."""
    states = solve_relaxed(gsde_spec, mu, paths)
    values = chi(cost_spec, mu, states)
    m = values.shape[0]
    se = float(np.std(values, ddof=1) / np.sqrt(m)) if m > 1 else 0.0
    return CostEstimate(value=float(np.mean(values)), se=se)


def cost_under_scenario(
    cost_spec: CostSpec,
    gsde_spec: GsdeSpec,
    mu: RelaxedControl,
    scenario: VolatilityScenario,
    noise: NoiseBundle,
) -> CostEstimate:
    """Monte-Carlo cost of mu under a single volatility scenario."""
    return cost_on_paths(cost_spec, gsde_spec, mu, generate_gbm(noise, scenario))


class RobustCostEstimate(NamedTuple):
    value: float
    se: float
    argmax_scenario: int


def robust_cost_on_paths(
    cost_spec: CostSpec,
    gsde_spec: GsdeSpec,
    mu: RelaxedControl,
    path_sets: Sequence[GPathSet],
) -> RobustCostEstimate:
    """Worst case of `cost_on_paths` over pre-generated per-scenario path sets.

    The path sets must come from one noise bundle (common random numbers);
    callers that evaluate many controls reuse them across evaluations.
    """
    if len(path_sets) == 0:
        raise ValueError("empty family")
    estimates = [cost_on_paths(cost_spec, gsde_spec, mu, ps) for ps in path_sets]
    best = sublinear_expectation([e.value for e in estimates])
    return RobustCostEstimate(
        value=best.value, se=estimates[best.argmax].se, argmax_scenario=best.argmax
    )


def robust_cost(
    cost_spec: CostSpec,
    gsde_spec: GsdeSpec,
    mu: RelaxedControl,
    family: ScenarioFamily,
    noise: NoiseBundle,
) -> RobustCostEstimate:
    """Worst-case cost of mu over the scenario family on common noise."""
    path_sets = [generate_gbm(noise, s) for s in family.scenarios]
    return robust_cost_on_paths(cost_spec, gsde_spec, mu, path_sets)


@dataclass(frozen=True)
class CostStabilityRow:
    n: int
    value: float
    se: float
    diff: float
    diff_se: float


def cost_stability_study(
    cost_spec: CostSpec,
    gsde_spec: GsdeSpec,
    mu: RelaxedControl,
    n_list: Sequence[int],
    family: ScenarioFamily,
    noise: NoiseBundle,
) -> tuple[list[CostStabilityRow], RobustCostEstimate]:
    """Robust cost of chattered controls against the relaxed benchmark.

    The noise bundle's grid is the shared refined grid: it must be a multiple
    of n * |U| for every n. Returns per-n rows with |J(u_n) - J(mu)| and a
    conservative difference SE (quadrature sum of the two attaining-scenario
    SEs), plus the refined-grid estimate of J(mu).
    """
    grid = noise.grid
    path_sets = [generate_gbm(noise, s) for s in family.scenarios]
    mu_ref = resample(mu, grid)
    target = robust_cost_on_paths(cost_spec, gsde_spec, mu_ref, path_sets)
    rows: list[CostStabilityRow] = []
    for n in n_list:
        u_n = chatter(mu, n, refined_steps=grid.n_steps)
        est = robust_cost_on_paths(cost_spec, gsde_spec, embed_strict(u_n), path_sets)
        rows.append(
            CostStabilityRow(
                n=int(n),
                value=est.value,
                se=est.se,
                diff=abs(est.value - target.value),
                diff_se=float(np.hypot(est.se, target.se)),
            )
        )
    return rows, target


def fit_envelope_constant(rows: Sequence[CostStabilityRow], n_se: float = 2.0) -> float:
    """Smallest C with diff_n <= n_se * SE_n + C / n for every tabulated n."""
    c = 0.0
    for row in rows:
        c = max(c, row.n * max(row.diff - n_se * row.diff_se, 0.0))
    return c
