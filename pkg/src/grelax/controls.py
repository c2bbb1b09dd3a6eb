"""Strict and relaxed controls on a finite action set, and their approximation.

A strict control picks one action per time step. A relaxed control replaces
the pick with a probability row over actions, one row per step; strict
controls embed as one-hot rows. The pairing

    <q, phi> = sum_k sum_a weights[k, a] * phi(t_k, a) * dt

(left-endpoint rule) is the discrete version of integrating a test function
against the control's occupation measure; it is the topology in which the
chattering construction converges.

`chatter` turns a relaxed control back into a strict one on a refined grid:
split [0, T] into n blocks, average the weights over each block, then give
each action a consecutive run of refined steps inside the block whose length
matches its average weight (largest-remainder apportionment, fixed action
order). Block occupation fractions are then within one refined step of the
averaged weights, and pairings converge at rate 1/n for test functions
Lipschitz in t.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .paths import TimeGrid

__all__ = [
    "ActionSet",
    "RelaxedControl",
    "StrictControl",
    "embed_strict",
    "chatter",
    "resample",
    "stable_pairing",
    "chattering_convergence_study",
    "ChatteringStudy",
]

ROW_SUM_TOL = 1e-12
DEFAULT_REFINEMENT_FACTOR = 8


@dataclass(frozen=True)
class ActionSet:
    """Ordered, pairwise-distinct action values; the order is part of the value."""

    actions: tuple

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(float(a) for a in self.actions))
        if len(self.actions) == 0:
            raise ValueError("action set must be non-empty")
        if len(set(self.actions)) != len(self.actions):
            raise ValueError(f"action values must be distinct, got {self.actions}")

    def __len__(self) -> int:
        return len(self.actions)

    def values(self) -> np.ndarray:
        return np.asarray(self.actions, dtype=float)


@dataclass(frozen=True, eq=False)
class RelaxedControl:
    """Row-stochastic weights over actions, one row per step of `grid`."""

    grid: TimeGrid
    actions: ActionSet
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 2 or w.shape != (self.grid.n_steps, len(self.actions)):
            raise ValueError(
                f"weights shape {w.shape} must be (n_steps, n_actions) = "
                f"({self.grid.n_steps}, {len(self.actions)})"
            )
        if np.any(w < -ROW_SUM_TOL):
            raise ValueError("weights must be nonnegative")
        row_sums = w.sum(axis=1)
        if np.any(np.abs(row_sums - 1.0) > ROW_SUM_TOL):
            k = int(np.argmax(np.abs(row_sums - 1.0)))
            raise ValueError(f"row {k} sums to {row_sums[k]!r}, expected 1")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @staticmethod
    def constant(row: Sequence[float], grid: TimeGrid, actions: ActionSet) -> "RelaxedControl":
        weights = np.tile(np.asarray(row, dtype=float), (grid.n_steps, 1))
        return RelaxedControl(grid=grid, actions=actions, weights=weights)

    def to_json_dict(self) -> dict:
        return {
            "T": self.grid.T,
            "n_steps": self.grid.n_steps,
            "actions": list(self.actions.actions),
            "weights": self.weights.tolist(),
        }

    @staticmethod
    def from_json_dict(data: dict) -> "RelaxedControl":
        return RelaxedControl(
            grid=TimeGrid(T=float(data["T"]), n_steps=int(data["n_steps"])),
            actions=ActionSet(tuple(data["actions"])),
            weights=np.asarray(data["weights"], dtype=float),
        )


@dataclass(frozen=True, eq=False)
class StrictControl:
    """One action index per step of `grid`."""

    grid: TimeGrid
    actions: ActionSet
    action_index: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.action_index, dtype=int)
        if idx.shape != (self.grid.n_steps,):
            raise ValueError(
                f"action_index shape {idx.shape} must be ({self.grid.n_steps},)"
            )
        if np.any(idx < 0) or np.any(idx >= len(self.actions)):
            raise ValueError("action indices out of range")
        idx = idx.copy()
        idx.setflags(write=False)
        object.__setattr__(self, "action_index", idx)

    def action_values(self) -> np.ndarray:
        return self.actions.values()[self.action_index]

    def to_json_dict(self) -> dict:
        return {
            "T": self.grid.T,
            "n_steps": self.grid.n_steps,
            "actions": list(self.actions.actions),
            "action_index": self.action_index.tolist(),
        }

    @staticmethod
    def from_json_dict(data: dict) -> "StrictControl":
        return StrictControl(
            grid=TimeGrid(T=float(data["T"]), n_steps=int(data["n_steps"])),
            actions=ActionSet(tuple(data["actions"])),
            action_index=np.asarray(data["action_index"], dtype=int),
        )


def embed_strict(u: StrictControl, actions: Optional[ActionSet] = None) -> RelaxedControl:
    """One-hot embedding of a strict control into the relaxed class."""
    acts = actions if actions is not None else u.actions
    if acts.actions != u.actions.actions:
        raise ValueError("action set does not match the control's")
    weights = np.zeros((u.grid.n_steps, len(acts)))
    weights[np.arange(u.grid.n_steps), u.action_index] = 1.0
    return RelaxedControl(grid=u.grid, actions=acts, weights=weights)


def _block_average_weights(mu: RelaxedControl, n_blocks: int) -> np.ndarray:
    """Time-average of mu's weights over each of n equal blocks of [0, T].

    Computed by exact overlap of mu's steps with the blocks, so it is valid
    whether or not block boundaries align with mu's grid.
    """
    T = mu.grid.T
    n_mu = mu.grid.n_steps
    block_len = T / n_blocks
    mu_dt = mu.grid.dt
    out = np.zeros((n_blocks, len(mu.actions)))
    for i in range(n_blocks):
        lo = i * block_len
        hi = (i + 1) * block_len
        k_lo = int(np.floor(lo / mu_dt * (1 + 1e-15)))
        k_hi = min(int(np.ceil(hi / mu_dt * (1 - 1e-15))), n_mu)
        acc = np.zeros(len(mu.actions))
        for k in range(k_lo, k_hi):
            overlap = min(hi, (k + 1) * mu_dt) - max(lo, k * mu_dt)
            if overlap > 0:
                acc += overlap * mu.weights[k]
        out[i] = acc / block_len
    return out


def _apportion(weights: np.ndarray, total: int) -> np.ndarray:
    """Largest-remainder apportionment of `total` slots to the weight vector.

    Ties in the remainder go to the lower index. Zero weights get zero slots.
    """
    quota = weights * total
    counts = np.floor(quota).astype(int)
    short = total - int(counts.sum())
    if short > 0:
        remainders = quota - counts
        # stable sort descending by remainder, index order breaking ties
        order = np.argsort(-remainders, kind="stable")
        counts[order[:short]] += 1
    return counts


def chatter(
    mu: RelaxedControl,
    n: int,
    refined_steps: Optional[int] = None,
    refinement_factor: int = DEFAULT_REFINEMENT_FACTOR,
) -> StrictControl:
    """Strict control occupying each action for its block-averaged weight share.

    The output lives on a refined grid of n * |U| * r steps (r =
    `refinement_factor`, or implied by an explicit `refined_steps`); each of
    the n blocks is split into consecutive runs per action, in action order,
    sized by largest-remainder apportionment of the block's refined steps.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    n_actions = len(mu.actions)
    if refined_steps is None:
        refined_steps = n * n_actions * refinement_factor
    if refined_steps % (n * n_actions) != 0:
        raise ValueError(
            f"refined_steps={refined_steps} must be a multiple of n*|U|={n * n_actions}"
        )
    per_block = refined_steps // n
    averages = _block_average_weights(mu, n)
    index = np.empty(refined_steps, dtype=int)
    pos = 0
    for i in range(n):
        counts = _apportion(averages[i], per_block)
        for a, c in enumerate(counts):
            index[pos : pos + c] = a
            pos += c
    refined_grid = TimeGrid(T=mu.grid.T, n_steps=refined_steps)
    return StrictControl(grid=refined_grid, actions=mu.actions, action_index=index)


def resample(mu: RelaxedControl, target_grid: TimeGrid) -> RelaxedControl:
    """Re-express mu on another grid by exact overlap averaging.

    For a refinement of mu's grid this repeats rows exactly; in general each
    target row is the length-weighted average of the source rows it covers,
    so rows stay on the simplex.
    """
    if abs(target_grid.T - mu.grid.T) > 1e-12 * max(1.0, mu.grid.T):
        raise ValueError("target grid horizon differs from the control's")
    if target_grid.n_steps % mu.grid.n_steps == 0:
        # exact refinement: repeat rows, no arithmetic on the weights
        rep = target_grid.n_steps // mu.grid.n_steps
        weights = np.repeat(mu.weights, rep, axis=0)
    else:
        weights = _block_average_weights(mu, target_grid.n_steps)
        weights = weights / weights.sum(axis=1, keepdims=True)
    return RelaxedControl(grid=target_grid, actions=mu.actions, weights=weights)


def stable_pairing(
    q,
    phi: Callable[[float, float], float],
    grid: Optional[TimeGrid] = None,
) -> float:
    """Integral of phi(t, a) against the control's occupation measure.

    Accepts a relaxed control or a strict one (embedded on the fly). phi is
    evaluated at left endpoints: sum_k [sum_a w_k(a) phi(t_k, a)] * dt.
    """
    if isinstance(q, StrictControl):
        q = embed_strict(q)
    if grid is not None and not grid.matches(q.grid):
        raise ValueError("explicit grid does not match the control's grid")
    g = q.grid
    acts = q.actions.values()
    dt = g.dt
    total = 0.0
    for k in range(g.n_steps):
        t_k = k * dt
        row = q.weights[k]
        inner = 0.0
        for a_idx in range(len(acts)):
            inner += row[a_idx] * phi(t_k, acts[a_idx])
        total += inner * dt
    return total


@dataclass(frozen=True)
class ChatteringStudy:
    """Pairing errors of chattered controls, per test function and block count."""

    n_list: tuple
    phi_labels: tuple
    errors: np.ndarray  # shape (len(phi_list), len(n_list))
    slopes: tuple  # fitted log-log slope per phi; None when errors vanish

    def rows(self) -> list[dict]:
        out = []
        for j, n in enumerate(self.n_list):
            out.append(
                {"n": n, **{lbl: float(self.errors[i, j]) for i, lbl in enumerate(self.phi_labels)}}
            )
        return out


def chattering_convergence_study(
    mu: RelaxedControl,
    phi_list: Sequence[Callable[[float, float], float]],
    n_list: Sequence[int],
    refinement_factor: int = DEFAULT_REFINEMENT_FACTOR,
    phi_labels: Optional[Sequence[str]] = None,
) -> ChatteringStudy:
    """Tabulate |pairing(chatter(mu, n)) - pairing(mu)| over n and fit slopes.

    Test functions should be bounded, and continuous in the action for fixed
    time. Errors identically below 1e-14 yield slope None (exact case).
    """
    labels = tuple(phi_labels) if phi_labels is not None else tuple(
        getattr(phi, "__name__", f"phi{i}") for i, phi in enumerate(phi_list)
    )
    targets = [stable_pairing(mu, phi) for phi in phi_list]
    errors = np.empty((len(phi_list), len(n_list)))
    for j, n in enumerate(n_list):
        u_n = chatter(mu, n, refinement_factor=refinement_factor)
        for i, phi in enumerate(phi_list):
            errors[i, j] = abs(stable_pairing(u_n, phi) - targets[i])
    slopes = []
    log_n = np.log(np.asarray(n_list, dtype=float))
    for i in range(len(phi_list)):
        if np.all(errors[i] < 1e-14):
            slopes.append(None)
        else:
            safe = np.maximum(errors[i], 1e-300)
            slopes.append(float(np.polyfit(log_n, np.log(safe), 1)[0]))
    return ChatteringStudy(
        n_list=tuple(int(n) for n in n_list),
        phi_labels=labels,
        errors=errors,
        slopes=tuple(slopes),
    )
