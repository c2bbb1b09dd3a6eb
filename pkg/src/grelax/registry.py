"""Named parametric families of dynamics, costs and payoffs.

Configs select coefficients by name with a parameter dict; no runtime code
loading. Every builder returns a spec whose callables accept numpy arrays
for the state argument and whose declared bounds come from the parameters.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .costs import CostSpec
from .sde import GsdeSpec

__all__ = ["build_dynamics", "build_cost", "build_payoff", "DYNAMICS", "COSTS", "PAYOFFS"]


def _dyn_linear(params: dict) -> GsdeSpec:
    """b = kappa * x + beta * a, sigma and gamma constant."""
    kappa = float(params.get("kappa", 0.0))
    beta = float(params.get("beta", 1.0))
    sigma0 = float(params.get("sigma0", 0.0))
    gamma0 = float(params.get("gamma0", 0.0))
    x0 = float(params.get("x0", 0.0))
    bound = float(params.get("bound", 100.0))
    return GsdeSpec(
        drift=lambda t, x, a: kappa * x + beta * a,
        diffusion=lambda t, x: sigma0,
        qv_drift=lambda t, x, a: gamma0,
        x0=x0,
        declared_bound=bound,
        declared_lipschitz=abs(kappa),
    )


def _dyn_affine_in_action(params: dict) -> GsdeSpec:
    """b = b0 + b1 * a, sigma constant, gamma = g0 + g1 * a."""
    b0 = float(params.get("b0", 0.0))
    b1 = float(params.get("b1", 1.0))
    sigma0 = float(params.get("sigma0", 0.0))
    g0 = float(params.get("g0", 0.0))
    g1 = float(params.get("g1", 0.0))
    x0 = float(params.get("x0", 0.0))
    bound = float(params.get("bound", 100.0))
    return GsdeSpec(
        drift=lambda t, x, a: b0 + b1 * a + 0.0 * x,
        diffusion=lambda t, x: sigma0,
        qv_drift=lambda t, x, a: g0 + g1 * a + 0.0 * x,
        x0=x0,
        declared_bound=bound,
        declared_lipschitz=0.0,
    )


def _dyn_bang_bang(params: dict) -> GsdeSpec:
    """Benchmark with drift equal to the action and a small constant diffusion.

    The relaxed minimiser of a symmetric action set keeps the state on pure
    noise; every strict control must chatter to approximate it.
    """
    eps = float(params.get("eps", 0.1))
    x0 = float(params.get("x0", 0.0))
    bound = float(params.get("bound", 100.0))
    return GsdeSpec(
        drift=lambda t, x, a: a + 0.0 * x,
        diffusion=lambda t, x: eps,
        qv_drift=lambda t, x, a: 0.0,
        x0=x0,
        declared_bound=bound,
        declared_lipschitz=0.0,
    )


def _poly_eval(coeffs, x, a):
    """sum_{i,j} coeffs[i][j] * x^i * a^j for a coefficient table."""
    total = np.zeros_like(np.asarray(x, dtype=float))
    for i, row in enumerate(coeffs):
        for j, c in enumerate(row):
            if c != 0.0:
                total = total + float(c) * np.power(x, i) * (a**j)
    return total


def _dyn_polynomial(params: dict) -> GsdeSpec:
    """User polynomial coefficients: b_coeffs/gamma_coeffs[i][j] on x^i a^j,
    sigma_coeffs[i] on x^i."""
    b_coeffs = params.get("b_coeffs", [[0.0]])
    sigma_coeffs = params.get("sigma_coeffs", [0.0])
    gamma_coeffs = params.get("gamma_coeffs", [[0.0]])
    x0 = float(params.get("x0", 0.0))
    bound = float(params.get("bound", 100.0))
    lip = float(params.get("lipschitz", 10.0))
    return GsdeSpec(
        drift=lambda t, x, a: _poly_eval(b_coeffs, x, a),
        diffusion=lambda t, x: _poly_eval([[c] for c in sigma_coeffs], x, 0.0),
        qv_drift=lambda t, x, a: _poly_eval(gamma_coeffs, x, a),
        x0=x0,
        declared_bound=bound,
        declared_lipschitz=lip,
    )


DYNAMICS: dict[str, Callable[[dict], GsdeSpec]] = {
    "linear": _dyn_linear,
    "affine_in_action": _dyn_affine_in_action,
    "bang_bang": _dyn_bang_bang,
    "polynomial": _dyn_polynomial,
}


def _cost_quadratic_state(params: dict) -> CostSpec:
    weight = float(params.get("weight", 1.0))
    terminal_weight = float(params.get("terminal_weight", 0.0))
    bound = float(params.get("bound", 100.0))
    return CostSpec(
        running=lambda t, x, a: weight * np.square(x),
        terminal=lambda x: terminal_weight * np.square(x),
        declared_bound=bound,
    )


def _cost_terminal_linear(params: dict) -> CostSpec:
    slope = float(params.get("slope", -1.0))
    bound = float(params.get("bound", 100.0))
    return CostSpec(
        running=lambda t, x, a: 0.0 * x,
        terminal=lambda x: slope * x,
        declared_bound=bound,
    )


def _cost_tracking(params: dict) -> CostSpec:
    target = float(params.get("target", 0.0))
    weight = float(params.get("weight", 1.0))
    terminal_weight = float(params.get("terminal_weight", 1.0))
    action_weight = float(params.get("action_weight", 0.0))
    bound = float(params.get("bound", 100.0))
    return CostSpec(
        running=lambda t, x, a: weight * np.square(x - target) + action_weight * a * a,
        terminal=lambda x: terminal_weight * np.square(x - target),
        declared_bound=bound,
    )


def _cost_constant(params: dict) -> CostSpec:
    level = float(params.get("level", 1.0))
    bound = float(params.get("bound", max(abs(level), 1.0) * 2.0))
    return CostSpec(
        running=lambda t, x, a: 0.0 * x,
        terminal=lambda x: level + 0.0 * x,
        declared_bound=bound,
    )


COSTS: dict[str, Callable[[dict], CostSpec]] = {
    "quadratic_state": _cost_quadratic_state,
    "terminal_linear": _cost_terminal_linear,
    "tracking": _cost_tracking,
    "constant": _cost_constant,
}


PAYOFFS: dict[str, Callable[[dict], Callable]] = {
    "square": lambda p: (lambda x: np.square(x)),
    "neg_square": lambda p: (lambda x: -np.square(x)),
    "abs": lambda p: (lambda x: np.abs(x)),
    "identity": lambda p: (lambda x: np.asarray(x, dtype=float) + 0.0),
    "call": lambda p: (lambda x: np.maximum(x - float(p.get("strike", 0.0)), 0.0)),
    "constant": lambda p: (lambda x: float(p.get("level", 1.0)) + 0.0 * np.asarray(x, dtype=float)),
}


def build_dynamics(name: str, params: dict) -> GsdeSpec:
    if name not in DYNAMICS:
        raise KeyError(f"unknown dynamics family {name!r}; known: {sorted(DYNAMICS)}")
    return DYNAMICS[name](params or {})


def build_cost(name: str, params: dict) -> CostSpec:
    if name not in COSTS:
        raise KeyError(f"unknown cost family {name!r}; known: {sorted(COSTS)}")
    return COSTS[name](params or {})


def build_payoff(name: str, params: dict) -> Callable:
    if name not in PAYOFFS:
        raise KeyError(f"unknown payoff {name!r}; known: {sorted(PAYOFFS)}")
    return PAYOFFS[name](params or {})
