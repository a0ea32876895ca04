"""Normalized anisotropic sigma_k flow of a support function.

    dh/dt = sigma_k phi(h) h eta(t) / f - h,
    eta(t) = int h f / phi(h) dx / int h sigma_k dx,

integrated with classical RK4.  eta is recomputed at every stage, which makes
J = int Phi(h) f dx an exact invariant of the semi-discrete system.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, NamedTuple, Optional

import numpy as np

from .geometry import eigen_radii, radii_matrix, sigma_k_matrix
from .orlicz import OrliczModel
from .sphere import ScalarField, SphericalGrid

logger = logging.getLogger(__name__)

RK4_REAL_STABILITY = 2.785


class FlowGuardError(RuntimeError):
    """The state left the cone of positive, strictly convex support functions."""

    def __init__(self, message: str, node: Optional[tuple] = None, angles: Optional[tuple] = None):
        super().__init__(message)
        self.node = node
        self.angles = angles


class ConvexityLostError(FlowGuardError):
    """Step retries were exhausted without producing an admissible state."""


@dataclass(frozen=True, eq=False)
class FlowConfig:
    k: int
    model: OrliczModel
    f: ScalarField
    dt0: float = 1e-3
    dt_min: float = 1e-12
    dt_max: float = 1e-2
    step_cap_delta: float = 1e-3
    tol_stationary: float = 1e-9
    t_max: float = 100.0
    step_max: int = 1_000_000
    lon_filter: str = "polar"
    # fraction of the RK4 real-axis stability limit; None disables the bound
    stability_safety: Optional[float] = 0.8
    max_retries: int = 20
    dt_growth: float = 1.25

    def __post_init__(self):
        d = self.grid.dim
        if not 1 <= self.k <= d:
            raise ValueError(f"k must satisfy 1 <= k <= n-1 = {d}, got {self.k}")
        if not np.all(self.f.values > 0):
            raise ValueError("f must be strictly positive")
        if not (0 < self.dt_min <= self.dt0 <= self.dt_max):
            raise ValueError("need 0 < dt_min <= dt0 <= dt_max")
        if not self.step_cap_delta > 0:
            raise ValueError("step_cap_delta must be positive")

    @property
    def grid(self) -> SphericalGrid:
        return self.f.grid


@dataclass(frozen=True, eq=False)
class FlowState:
    h: ScalarField
    t: float = 0.0
    step: int = 0
    dt: float = 1e-3
    last_dt: float = 0.0
    rejections: int = 0


@dataclass(frozen=True, eq=False)
class Evaluation:
    """Everything the right-hand side needs, evaluated at one support field."""

    h: np.ndarray
    grad: np.ndarray
    b: np.ndarray
    sigma: np.ndarray
    phi: np.ndarray
    V: float
    eta: float
    rhs: np.ndarray

    @property
    def stationarity(self) -> float:
        """sup |dh/dt| / sup h."""
        return float(np.abs(self.rhs).max() / self.h.max())


def evaluate(h: np.ndarray, cfg: FlowConfig) -> Evaluation:
    grid = cfg.grid
    if not np.all(np.isfinite(h)):
        raise FlowGuardError("non-finite support function")
    if h.min() <= 0:
        node = np.unravel_index(int(np.argmin(h)), h.shape)
        raise FlowGuardError("support function is not positive", node)
    grad, b = radii_matrix(grid, h, cfg.lon_filter)
    sigma = sigma_k_matrix(b, cfg.k)
    phi = cfg.model.phi(h)
    f = cfg.f.values
    V = grid.integrate(h * sigma)
    if not V > 0:
        raise FlowGuardError(f"int h sigma_k = {V:.3e} is not positive")
    eta = grid.integrate(h * f / phi) / V
    rhs = sigma * phi * h * eta / f - h
    return Evaluation(h, grad, b, sigma, phi, V, eta, rhs)


def eta(h: ScalarField, f: ScalarField, model: OrliczModel, k: int) -> float:
    grid = h.grid
    _, b = radii_matrix(grid, h.values)
    sigma = sigma_k_matrix(b, k)
    V = grid.integrate(h.values * sigma)
    if not V > 0:
        raise FlowGuardError(f"int h sigma_k = {V:.3e} is not positive")
    return grid.integrate(h.values * f.values / model.phi(h.values)) / V


def flow_rhs(h: ScalarField, cfg: FlowConfig) -> ScalarField:
    return ScalarField(h.grid, evaluate(h.values, cfg).rhs)


def stable_dt(ev: Evaluation, cfg: FlowConfig) -> float:
    """Explicit RK4 step bound from the largest diffusion coefficient."""
    if cfg.stability_safety is None:
        return np.inf
    n_coef = ev.phi * ev.h / cfg.f.values * ev.eta
    if cfg.k == 1:
        leading = 1.0 / cfg.grid.dim
    else:
        leading = np.abs(eigen_radii(ev.b)).max(axis=-1)
    lam = float(np.max(n_coef * leading)) * cfg.grid.stiffness(cfg.lon_filter)
    return cfg.stability_safety * RK4_REAL_STABILITY / lam


def rk4_step(h: np.ndarray, dt: float, cfg: FlowConfig, k1: Optional[np.ndarray] = None) -> np.ndarray:
    if k1 is None:
        k1 = evaluate(h, cfg).rhs
    k2 = evaluate(h + 0.5 * dt * k1, cfg).rhs
    k3 = evaluate(h + 0.5 * dt * k2, cfg).rhs
    k4 = evaluate(h + dt * k3, cfg).rhs
    return h + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _guard(h_new: np.ndarray, h: np.ndarray, cfg: FlowConfig) -> Optional[str]:
    if not np.all(np.isfinite(h_new)):
        return "non-finite values"
    if h_new.min() <= 0:
        return "h <= 0"
    _, b = radii_matrix(cfg.grid, h_new, cfg.lon_filter)
    if eigen_radii(b)[..., 0].min() <= 0:
        return "min principal radius <= 0"
    if np.max(np.abs(h_new - h) / h) > cfg.step_cap_delta:
        return "relative change exceeds step_cap_delta"
    return None


def _offending_node(grid: SphericalGrid, h: np.ndarray, cfg: FlowConfig):
    with np.errstate(all="ignore"):
        _, b = radii_matrix(grid, h, cfg.lon_filter)
        score = np.minimum(eigen_radii(b)[..., 0], h)
    score = np.where(np.isfinite(score), score, -np.inf)
    node = np.unravel_index(int(np.argmin(score)), h.shape)
    return node, tuple(float(a[node]) for a in grid.angles)


def step(state: FlowState, cfg: FlowConfig, ev: Optional[Evaluation] = None) -> FlowState:
    """One accepted RK4 step, halving dt on guard violations."""
    h = state.h.values
    if ev is None:
        ev = evaluate(h, cfg)
    dt = min(state.dt, cfg.dt_max, stable_dt(ev, cfg))
    rate = float(np.max(np.abs(ev.rhs) / h))
    if rate > 0:
        dt = min(dt, 0.9 * cfg.step_cap_delta / rate)
    h_try, reason = None, "no attempt"
    for attempt in range(cfg.max_retries + 1):
        if dt < cfg.dt_min:
            break
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                h_try = rk4_step(h, dt, cfg, ev.rhs)
            reason = _guard(h_try, h, cfg)
        except FlowGuardError as exc:
            reason = str(exc)
        if reason is None:
            return FlowState(
                ScalarField(cfg.grid, h_try),
                t=state.t + dt,
                step=state.step + 1,
                dt=min(dt * cfg.dt_growth, cfg.dt_max),
                last_dt=dt,
                rejections=state.rejections + attempt,
            )
        logger.debug("step %d rejected at dt=%.3e: %s", state.step, dt, reason)
        dt *= 0.5
    node, angles = (None, None) if h_try is None else _offending_node(cfg.grid, h_try, cfg)
    raise ConvexityLostError(
        f"no admissible step at t={state.t:.6g} (last dt={dt:.3e}): {reason}; node {node} angles {angles}",
        node, angles)


def advance_to(state: FlowState, cfg: FlowConfig, t_target: float) -> FlowState:
    """Step until exactly ``t_target`` (last step clamped)."""
    while state.t < t_target * (1 - 1e-15):
        remaining = t_target - state.t
        trial = replace(state, dt=min(state.dt, remaining))
        nxt = step(trial, cfg)
        if abs(nxt.t - t_target) < 1e-14 * max(1.0, t_target):
            nxt = replace(nxt, t=t_target, dt=state.dt)
        state = nxt
    return state


class RunResult(NamedTuple):
    state: FlowState
    reason: str  # "converged" | "budget_exhausted" | "convexity_lost"
    message: str = ""


Observer = Callable[["object", FlowState], None]


def run(cfg: FlowConfig, h0: ScalarField, observers: Iterable[Observer] = ()) -> RunResult:
    """Integrate to stationarity; every accepted state is reported to observers."""
    from .diagnostics import make_record

    observers = list(observers)
    state = FlowState(h0, dt=cfg.dt0)
    try:
        ev = evaluate(h0.values, cfg)
    except FlowGuardError as exc:
        return RunResult(state, "convexity_lost", str(exc))
    while True:
        record = make_record(state, ev, cfg)
        for obs in observers:
            obs(record, state)
        if ev.stationarity <= cfg.tol_stationary:
            return RunResult(state, "converged")
        if state.t >= cfg.t_max or state.step >= cfg.step_max:
            return RunResult(state, "budget_exhausted",
                             f"stopped at t={state.t:.6g}, step {state.step}, stationarity {ev.stationarity:.3e}")
        try:
            state = step(state, cfg, ev)
            ev = evaluate(state.h.values, cfg)
        except FlowGuardError as exc:
            return RunResult(state, "convexity_lost", str(exc))
