"""Noise generation, volatility-scenario path simulation and discrete stochastic integrals.

The driving object is a bundle of standard normal increments shared by every
volatility scenario (common random numbers). Each scenario turns the shared
noise into a pair of processes per path:

    B_{k+1}      = B_k + sigma_k * sqrt(dt) * Z_k        (the noisy path)
    <B>_{k+1}    = <B>_k + sigma_k^2 * dt                (its quadratic variation)

with sigma_k the scenario's volatility at step start. Taking worst cases over
a scenario family on top of these paths realises a sublinear expectation; the
integrals below are the plain per-path Ito sums that the family-wide checks
(`check_isometry`, `check_bdg`) reduce over.

Summation discipline: path increments are recomputed from stored volatilities
with the exact expression used during generation, and integrals accumulate
sequentially (cumsum) in step order. Telescoping identities such as
"integral of 1 dB equals B_T" then hold bitwise, not just to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .scenarios import ScenarioFamily, VolatilityScenario, sublinear_expectation

__all__ = [
    "TimeGrid",
    "NoiseBundle",
    "GPathSet",
    "generate_noise",
    "generate_gbm",
    "family_paths",
    "family_estimates",
    "g_integral",
    "qv_integral",
    "check_isometry",
    "check_bdg",
    "IsometryReport",
    "BdgReport",
]

# Empirical moment bounds used by check_bdg; Doob-type constants for p = 2, 4.
BDG_CONSTANTS = {2: 4.0, 4: 36.0}


@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition of [0, T] into n_steps steps."""

    T: float
    n_steps: int

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"horizon must be positive, got T={self.T}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")

    @property
    def dt(self) -> float:
        return self.T / self.n_steps

    @property
    def nodes(self) -> np.ndarray:
        """Node times t_0 = 0 < ... < t_n = T (length n_steps + 1)."""
        return np.linspace(0.0, self.T, self.n_steps + 1)

    def matches(self, other: "TimeGrid") -> bool:
        return self.n_steps == other.n_steps and abs(self.T - other.T) <= 1e-12 * max(1.0, self.T)


@dataclass(frozen=True, eq=False)
class NoiseBundle:
    """Seeded standard-normal increments shared across scenarios.

    Fully determined by (seed, m_paths, grid); `generate_noise` with the same
    arguments reproduces the draws bitwise. Increments are shaped
    (m_paths, n_steps), path-major.
    """

    seed: int
    m_paths: int
    grid: TimeGrid
    increments: np.ndarray


def generate_noise(seed: int, m_paths: int, grid: TimeGrid) -> NoiseBundle:
    """Draw the shared standard-normal increment array.

    Generator: numpy PCG64 via default_rng(seed). Draws fill the
    (m_paths, n_steps) array in C order, i.e. path-major, step-minor.
    """
    if m_paths < 1:
        raise ValueError(f"m_paths must be >= 1, got {m_paths}")
    rng = np.random.default_rng(seed)
    increments = rng.standard_normal((m_paths, grid.n_steps))
    increments.setflags(write=False)
    return NoiseBundle(seed=int(seed), m_paths=int(m_paths), grid=grid, increments=increments)


@dataclass(frozen=True, eq=False)
class GPathSet:
    """Per-scenario bundle of noisy paths, quadratic variation and realised vols.

    b_paths and qv_paths have shape (m_paths, n_steps + 1) with column 0 equal
    to 0; sigma_used has shape (m_paths, n_steps). Arrays may be read-only
    broadcast views when the scenario is deterministic (every path shares the
    same volatility row).
    """

    scenario: VolatilityScenario
    grid: TimeGrid
    noise: NoiseBundle
    b_paths: np.ndarray
    qv_paths: np.ndarray
    sigma_used: np.ndarray

    @property
    def m_paths(self) -> int:
        return self.b_paths.shape[0]

    def b_increments(self) -> np.ndarray:
        """Recompute path increments with the generation-time expression.

        Returns sigma_used * (sqrt(dt) * Z) bitwise identical to the
        increments accumulated into b_paths, so telescoping sums against
        b_paths are exact.
        """
        return _b_increments(self.sigma_used, self.grid.dt, self.noise.increments)

    def qv_increments(self) -> np.ndarray:
        return _qv_increments(self.sigma_used, self.grid.dt)


def _b_increments(sigma_used: np.ndarray, dt: float, z: np.ndarray) -> np.ndarray:
    return sigma_used * (np.sqrt(dt) * z)


def _qv_increments(sigma_used: np.ndarray, dt: float) -> np.ndarray:
    return np.square(sigma_used) * dt


def _prepend_zero_cumsum(increments: np.ndarray) -> np.ndarray:
    m = increments.shape[0]
    out = np.empty((m, increments.shape[1] + 1), dtype=float)
    out[:, 0] = 0.0
    np.cumsum(increments, axis=1, out=out[:, 1:])
    return out


def generate_gbm(noise: NoiseBundle, scenario: VolatilityScenario) -> GPathSet:
    """Simulate the scenario's noisy paths and quadratic variation on the shared noise.

    Deterministic scenarios are fully vectorised; feedback scenarios evaluate
    the tabulated volatility from the current path value at each step start.
    Raises if the scenario's grid does not match the noise grid or a
    volatility falls outside the band.
    """
    grid = noise.grid
    m, n = noise.m_paths, grid.n_steps
    band = scenario.band

    if scenario.kind == "deterministic":
        if len(scenario.values) != n:
            raise ValueError(
                f"scenario grid mismatch: scenario has {len(scenario.values)} steps, "
                f"noise grid has {n}"
            )
        sigma_row = np.asarray(scenario.values, dtype=float)
        _check_band(sigma_row, band)
        db_row = None  # per-path rows are identical up to the noise factor
        sigma_used = np.broadcast_to(sigma_row, (m, n))
        db = _b_increments(sigma_used, grid.dt, noise.increments)
        b_paths = _prepend_zero_cumsum(db)
        qv_row = np.concatenate(([0.0], np.cumsum(_qv_increments(sigma_row, grid.dt))))
        qv_paths = np.broadcast_to(qv_row, (m, n + 1))
    elif scenario.kind == "feedback":
        if abs(scenario.horizon - grid.T) > 1e-9 * max(1.0, grid.T):
            raise ValueError(
                f"scenario grid mismatch: feedback horizon {scenario.horizon} vs noise T {grid.T}"
            )
        sqrt_dt = np.sqrt(grid.dt)
        sigma_used = np.empty((m, n), dtype=float)
        b_paths = np.empty((m, n + 1), dtype=float)
        qv_paths = np.empty((m, n + 1), dtype=float)
        b_paths[:, 0] = 0.0
        qv_paths[:, 0] = 0.0
        t_nodes = grid.nodes
        z = noise.increments
        for k in range(n):
            sig = scenario.sigma_at(t_nodes[k], b_paths[:, k])
            sigma_used[:, k] = sig
            b_paths[:, k + 1] = b_paths[:, k] + sig * (sqrt_dt * z[:, k])
            qv_paths[:, k + 1] = qv_paths[:, k] + np.square(sig) * grid.dt
        _check_band(sigma_used, band)
    else:  # pragma: no cover - scenario constructor enforces the kind
        raise ValueError(f"unknown scenario kind {scenario.kind!r}")

    for arr in (b_paths, qv_paths, sigma_used):
        arr.setflags(write=False)
    return GPathSet(
        scenario=scenario,
        grid=grid,
        noise=noise,
        b_paths=b_paths,
        qv_paths=qv_paths,
        sigma_used=sigma_used,
    )


def _check_band(sigma, band) -> None:
    lo = float(np.min(sigma))
    hi = float(np.max(sigma))
    tol = 1e-12 * max(1.0, band.sigma_max)
    if lo < band.sigma_min - tol or hi > band.sigma_max + tol:
        raise ValueError(
            f"scenario out of band: realised volatilities in [{lo}, {hi}] "
            f"vs band [{band.sigma_min}, {band.sigma_max}]"
        )


def family_paths(family: ScenarioFamily, noise: NoiseBundle) -> list[GPathSet]:
    """One GPathSet per scenario, all on the shared noise, in family order."""
    return [generate_gbm(noise, scenario) for scenario in family.scenarios]


def family_estimates(
    payoff: Callable[[GPathSet], np.ndarray],
    family: ScenarioFamily,
    noise: NoiseBundle,
) -> tuple[list[float], list[float]]:
    """Per-scenario sample means and standard errors of a path functional.

    `payoff` maps a GPathSet to one value per path. Scenarios are evaluated in
    family order on the common noise; path sets are released between scenarios
    to bound memory.
    """
    means: list[float] = []
    ses: list[float] = []
    for scenario in family.scenarios:
        paths = generate_gbm(noise, scenario)
        values = np.asarray(payoff(paths), dtype=float)
        if values.shape != (noise.m_paths,):
            raise ValueError(
                f"payoff must return one value per path, got shape {values.shape}"
            )
        means.append(float(np.mean(values)))
        ses.append(_standard_error(values))
    return means, ses


def _standard_error(values: np.ndarray) -> float:
    m = values.shape[0]
    if m < 2:
        return 0.0
    return float(np.std(values, ddof=1) / np.sqrt(m))


def _eta_array(eta, m: int, n: int) -> np.ndarray:
    arr = np.asarray(eta, dtype=float)
    if arr.shape == (n,):
        arr = np.broadcast_to(arr, (m, n))
    if arr.shape != (m, n):
        raise ValueError(f"eta shape {arr.shape} does not match paths ({m}, {n})")
    return arr


def g_integral(eta, paths: GPathSet) -> np.ndarray:
    """Per-path Ito sum  sum_k eta_k (B_{k+1} - B_k).

    eta has one value per (path, step), or one per step (broadcast across
    paths); the step-k value may only use information up to t_k, which is the
    caller's responsibility. Accumulation is sequential in k so that eta = 1
    telescopes to B_T bitwise.
    """
    arr = _eta_array(eta, paths.m_paths, paths.grid.n_steps)
    return np.cumsum(arr * paths.b_increments(), axis=1)[:, -1]


def qv_integral(eta, paths: GPathSet) -> np.ndarray:
    """Per-path sum  sum_k eta_k (<B>_{k+1} - <B>_k)."""
    arr = _eta_array(eta, paths.m_paths, paths.grid.n_steps)
    return np.cumsum(arr * paths.qv_increments(), axis=1)[:, -1]


@dataclass(frozen=True)
class IsometryReport:
    lhs: float
    rhs: float
    rel_err: float
    se_lhs: float
    se_rhs: float


def check_isometry(
    eta,
    family: ScenarioFamily,
    noise: NoiseBundle,
    path_sets: Optional[Sequence[GPathSet]] = None,
) -> IsometryReport:
    """Compare the worst-case second moment of the integral with the worst-case
    quadratic-variation integral of eta^2.

    lhs is the family-sup estimate of (integral of eta dB)^2, rhs of
    integral of eta^2 d<B>; rel_err = |lhs - rhs| / max(|rhs|, 1e-12).
    `path_sets` may carry pre-generated per-scenario paths (family order, same
    noise) to amortise generation across many eta.
    """
    lhs_means: list[float] = []
    rhs_means: list[float] = []
    lhs_ses: list[float] = []
    rhs_ses: list[float] = []
    for idx, scenario in enumerate(family.scenarios):
        paths = path_sets[idx] if path_sets is not None else generate_gbm(noise, scenario)
        arr = _eta_array(eta, paths.m_paths, paths.grid.n_steps)
        stoch = np.cumsum(arr * paths.b_increments(), axis=1)[:, -1]
        quad = np.cumsum(np.square(arr) * paths.qv_increments(), axis=1)[:, -1]
        sq = np.square(stoch)
        lhs_means.append(float(np.mean(sq)))
        rhs_means.append(float(np.mean(quad)))
        lhs_ses.append(_standard_error(sq))
        rhs_ses.append(_standard_error(quad))
    lhs = sublinear_expectation(lhs_means)
    rhs = sublinear_expectation(rhs_means)
    rel_err = abs(lhs.value - rhs.value) / max(abs(rhs.value), 1e-12)
    return IsometryReport(
        lhs=lhs.value,
        rhs=rhs.value,
        rel_err=rel_err,
        se_lhs=lhs_ses[lhs.argmax],
        se_rhs=rhs_ses[rhs.argmax],
    )


@dataclass(frozen=True)
class BdgReport:
    p: float
    constant: float
    lhs: float
    rhs: float
    ratio: float
    se_lhs: float
    se_rhs: float

    @property
    def bound_holds(self) -> bool:
        return self.lhs <= self.constant * self.rhs + 1e-12

    def bound_holds_within(self, n_se: float = 3.0) -> bool:
        """Moment bound with an n_se Monte-Carlo cushion on both sides."""
        slack = n_se * float(np.hypot(self.se_lhs, self.constant * self.se_rhs))
        return self.lhs <= self.constant * self.rhs + slack


def check_bdg(
    eta,
    p: float,
    family: ScenarioFamily,
    noise: NoiseBundle,
    path_sets: Optional[Sequence[GPathSet]] = None,
) -> BdgReport:
    """Worst-case running-maximum moment bound for the integral of eta dB.

    lhs estimates the family sup of sup_k |sum_{j<k} eta_j dB_j|^p, rhs the
    family sup of (sum eta_j^2 d<B>_j)^{p/2}. Supported p: 2 and 4, with
    constants 4 and 36.
    """
    if p not in BDG_CONSTANTS:
        raise ValueError(f"unsupported p={p}; supported: {sorted(BDG_CONSTANTS)}")
    c_p = BDG_CONSTANTS[p]
    lhs_means: list[float] = []
    rhs_means: list[float] = []
    lhs_ses: list[float] = []
    rhs_ses: list[float] = []
    for idx, scenario in enumerate(family.scenarios):
        paths = path_sets[idx] if path_sets is not None else generate_gbm(noise, scenario)
        arr = _eta_array(eta, paths.m_paths, paths.grid.n_steps)
        partial = np.cumsum(arr * paths.b_increments(), axis=1)
        sup_pow = np.max(np.abs(partial), axis=1) ** p
        quad = np.cumsum(np.square(arr) * paths.qv_increments(), axis=1)[:, -1] ** (p / 2.0)
        lhs_means.append(float(np.mean(sup_pow)))
        rhs_means.append(float(np.mean(quad)))
        lhs_ses.append(_standard_error(sup_pow))
        rhs_ses.append(_standard_error(quad))
    lhs = sublinear_expectation(lhs_means)
    rhs = sublinear_expectation(rhs_means)
    ratio = lhs.value / max(rhs.value, 1e-300) if rhs.value > 0 else 0.0
    return BdgReport(
        p=p,
        constant=c_p,
        lhs=lhs.value,
        rhs=rhs.value,
        ratio=ratio,
        se_lhs=lhs_ses[lhs.argmax],
        se_rhs=rhs_ses[rhs.argmax],
    )
