"""Functionals, runtime monitors and identity checks along the flow."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np

from .flow import Evaluation, FlowConfig, FlowState, evaluate
from .geometry import eigen_radii, radii_matrix, sigma_k_gradient, sigma_k_matrix
from .orlicz import OrliczModel
from .sphere import ScalarField, SphericalGrid

CSV_FIELDS = (
    "t", "dt", "J", "V", "eta", "h_min", "h_max", "grad_h_max", "rho_min", "rho_max",
    "sigma_min", "sigma_max", "min_radius", "kappa_max", "residual_sup", "residual_l2", "holder_gap",
)


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    dt: float
    J: float
    V: float
    eta: float
    h_min: float
    h_max: float
    grad_h_max: float
    rho_min: float
    rho_max: float
    sigma_min: float
    sigma_max: float
    min_radius: float
    kappa_max: float
    residual_sup: float
    residual_l2: float
    holder_gap: float
    # not part of the CSV series
    step: int = 0
    stationarity: float = float("nan")
    c_ls: float = float("nan")

    def row(self) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name in CSV_FIELDS)


def _sigma(h: ScalarField, k: int) -> np.ndarray:
    _, b = radii_matrix(h.grid, h.values)
    return sigma_k_matrix(b, k)


def J_functional(h: ScalarField, f: ScalarField, model: OrliczModel) -> float:
    """int Phi(h) f dx."""
    return h.grid.integrate(model.antiderivative(h.values) * f.values)


def V_functional(h: ScalarField, k: int) -> float:
    """int h sigma_k dx."""
    return h.grid.integrate(h.values * _sigma(h, k))


def _holder_gap(grid, h, sigma, phi, f, V) -> float:
    a = grid.integrate(sigma**2 * phi * h / f)
    b = grid.integrate(h * f / phi)
    return (a * b - V**2) / V


def holder_gap(h: ScalarField, f: ScalarField, model: OrliczModel, k: int) -> float:
    """Cauchy-Schwarz gap [int sigma^2 phi h / f * int h f / phi - V^2] / V = V' / (k+1)."""
    sigma = _sigma(h, k)
    V = h.grid.integrate(h.values * sigma)
    return _holder_gap(h.grid, h.values, sigma, model.phi(h.values), f.values, V)


class Residual(NamedTuple):
    c_ls: float
    c_eta: float
    residual_sup: float
    residual_l2: float


def _residual(grid, h, sigma, phi, f, eta) -> Residual:
    g = phi * sigma
    c_ls = grid.integrate(f * g) / grid.integrate(g * g)
    rel = (c_ls * g - f) / f
    return Residual(c_ls, eta, float(np.abs(rel).max()), float(np.sqrt(grid.integrate(rel**2) / grid.area)))


def residual(h: ScalarField, f: ScalarField, model: OrliczModel, k: int) -> Residual:
    """Least-squares c for c phi(h) sigma_k = f, the current eta, and relative residuals."""
    grid = h.grid
    sigma = _sigma(h, k)
    phi = model.phi(h.values)
    V = grid.integrate(h.values * sigma)
    eta = grid.integrate(h.values * f.values / phi) / V
    return _residual(grid, h.values, sigma, phi, f.values, eta)


def make_record(state: FlowState, ev: Evaluation, cfg: FlowConfig) -> DiagnosticsRecord:
    grid = cfg.grid
    h, f = ev.h, cfg.f.values
    grad_norm = np.sqrt(np.sum(ev.grad**2, axis=0))
    rho = np.sqrt(h**2 + grad_norm**2)
    min_radius = float(eigen_radii(ev.b)[..., 0].min())
    res = _residual(grid, h, ev.sigma, ev.phi, f, ev.eta)
    return DiagnosticsRecord(
        t=state.t, dt=state.last_dt,
        J=grid.integrate(cfg.model.antiderivative(h) * f),
        V=ev.V, eta=ev.eta,
        h_min=float(h.min()), h_max=float(h.max()),
        grad_h_max=float(grad_norm.max()),
        rho_min=float(rho.min()), rho_max=float(rho.max()),
        sigma_min=float(ev.sigma.min()), sigma_max=float(ev.sigma.max()),
        min_radius=min_radius,
        kappa_max=1.0 / min_radius if min_radius > 0 else float("inf"),
        residual_sup=res.residual_sup, residual_l2=res.residual_l2,
        holder_gap=_holder_gap(grid, h, ev.sigma, ev.phi, f, ev.V),
        step=state.step, stationarity=ev.stationarity, c_ls=res.c_ls,
    )


@dataclass
class Monitor:
    """Observer accumulating the invariants the analysis guarantees.

    Never alters the trajectory.  ``violations`` lists per-step breaches of
    V monotonicity and the Hoelder inequality at the given tolerances.
    """

    v_rel_tol: float = 1e-8
    gap_tol: float = 1e-10
    records: list = field(default_factory=list)
    violations: list = field(default_factory=list)

    def __call__(self, record: DiagnosticsRecord, state: FlowState) -> None:
        if self.records:
            prev = self.records[-1]
            if record.V < prev.V * (1 - self.v_rel_tol):
                self.violations.append(f"V decreased at t={record.t:.6g}: {prev.V!r} -> {record.V!r}")
        if record.holder_gap < -self.gap_tol:
            self.violations.append(f"holder_gap {record.holder_gap:.3e} < 0 at t={record.t:.6g}")
        self.records.append(record)

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    @property
    def J_drift(self) -> float:
        J = self.series("J")
        return float(np.max(np.abs(J - J[0])) / abs(J[0]))

    def bounds(self) -> dict[str, float]:
        """Empirical floors and ceilings of the monitored a priori quantities."""
        out = {}
        for name in ("h_min", "rho_min", "sigma_min", "min_radius", "eta"):
            out[name + "_floor" if not name.endswith("_min") else name.replace("_min", "_floor")] = float(
                self.series(name).min())
        for name in ("h_max", "rho_max", "sigma_max", "kappa_max", "grad_h_max", "eta"):
            out[name.replace("_max", "") + "_ceiling"] = float(self.series(name).max())
        return out


# -- hypothesis on f ----------------------------------------------------------


class FCondition(NamedTuple):
    min_eigenvalue: float
    passed: bool
    node: tuple
    angles: tuple


def f_condition_check(f: ScalarField, k: int, a: float) -> FCondition:
    """Minimum eigenvalue of (k+1) g I + (k+a) Hess g with g = f^(-1/(k+a))."""
    grid = f.grid
    g = f.values ** (-1.0 / (k + a))
    _, hess = grid.derivatives(g)
    m = (k + a) * hess
    for i in range(grid.dim):
        m[i, i] = m[i, i] + (k + 1) * g
    lam = eigen_radii(m)[..., 0]
    node = np.unravel_index(int(np.argmin(lam)), lam.shape)
    return FCondition(float(lam[node]), bool(lam.min() > 0), node, tuple(float(x[node]) for x in grid.angles))


# -- evolution identity for rho^2 / 2 ------------------------------------------


def identity_rho_terms(h0: np.ndarray, h1: np.ndarray, dt: float, cfg: FlowConfig):
    """(lhs, rhs) of the rho^2/2 evolution identity between two states dt apart.

    The time derivative is the centered difference of rho^2/2; spatial terms
    are evaluated at the midpoint state with unfiltered derivatives, since
    the identity rests on derivatives commuting exactly.
    """
    grid, k = cfg.grid, cfg.k
    lf = "none"

    def half_rho2(h):
        grad = grid.derivatives(h, lf)[0]
        return 0.5 * (h**2 + np.sum(grad**2, axis=0))

    mid = 0.5 * (h0 + h1)
    ev = evaluate(mid, replace(cfg, lon_filter=lf))
    N = ev.phi * mid / cfg.f.values
    sig_grad = sigma_k_gradient(ev.b, k)
    hess_q = grid.derivatives(half_rho2(mid), lf)[1]
    grad_N = grid.derivatives(N, lf)[0]
    rho2 = 2.0 * half_rho2(mid)
    bb = np.einsum("mi...,mj...->ij...", ev.b, ev.b)

    lhs = (half_rho2(h1) - half_rho2(h0)) / dt - N * ev.eta * np.einsum("ij...,ij...->...", sig_grad, hess_q)
    rhs = ((k + 1) * mid * N * ev.eta * ev.sigma - rho2
           + ev.eta * ev.sigma * np.einsum("i...,i...->...", ev.grad, grad_N)
           - N * ev.eta * np.einsum("ij...,ij...->...", sig_grad, bb))
    return lhs, rhs


def identity_check_rho(h0: ScalarField, h1: ScalarField, dt: float, cfg: FlowConfig) -> float:
    """Sup-norm defect of the rho^2/2 identity between consecutive states."""
    lhs, rhs = identity_rho_terms(h0.values, h1.values, dt, cfg)
    return float(np.abs(lhs - rhs).max())


def identity_check_b(h0: ScalarField, h1: ScalarField, dt: float, cfg: FlowConfig) -> dict[str, float]:
    """Sup-norm defects of the radii-matrix evolution identities for k = 1.

    sigma_1 is linear in b, so its second derivatives vanish.  On S^1 both b
    and 1/b are scalars and are checked directly; on S^2 the trace of the b
    identity is checked, which reads
    dH/dt - (N eta / 2) Lap H = N eta H + eta (sigma Lap N + 2 grad sigma . grad N) - H
    for H = trace b.  Like the rho^2/2 check, spatial terms are unfiltered,
    so h1 should come from a step with ``lon_filter="none"`` when the identity
    is expected to close at O(dt^2).
    """
    if cfg.k != 1:
        raise ValueError("the radii-matrix identities are checked for k = 1 only")
    grid, lf = cfg.grid, "none"

    def trace_b(h):
        return np.trace(radii_matrix(grid, h, lf)[1], axis1=0, axis2=1)

    a, b = h0.values, h1.values
    mid = 0.5 * (a + b)
    ev = evaluate(mid, replace(cfg, lon_filter=lf))
    N = ev.phi * mid / cfg.f.values
    H = trace_b(mid)
    grad_H, hess_H = grid.derivatives(H, lf)
    grad_N, hess_N = grid.derivatives(N, lf)
    lap_H = np.trace(hess_H, axis1=0, axis2=1)
    lap_N = np.trace(hess_N, axis1=0, axis2=1)
    grad_sigma = grad_H / grid.dim
    forcing = ev.eta * (ev.sigma * lap_N + 2 * np.einsum("i...,i...->...", grad_sigma, grad_N))
    dH = (trace_b(b) - trace_b(a)) / dt
    name = "b" if grid.dim == 1 else "trace_b"
    out = {name: float(np.abs(dH - N * ev.eta / grid.dim * lap_H - (N * ev.eta * H + forcing - H)).max())}
    if grid.dim == 1:
        # d(1/b)/dt - N eta (1/b)'' = -N eta / b - eta (b N'' + 2 b' N') / b^2 - 2 N eta b'^2 / b^3 + 1/b
        inv = 1.0 / H
        _, hess_inv = grid.derivatives(inv, lf)
        d_inv = (1.0 / trace_b(b) - 1.0 / trace_b(a)) / dt
        rhs = (-N * ev.eta * inv - forcing * inv**2 - 2 * N * ev.eta * grad_H[0] ** 2 * inv**3 + inv)
        out["b_inverse"] = float(np.abs(d_inv - N * ev.eta * hess_inv[0, 0] - rhs).max())
    return out


def continuum_residual(h: ScalarField, f_func, model: OrliczModel, k: int, fine: SphericalGrid) -> Residual:
    """Residual of a discrete solution after spectral resampling onto ``fine``.

    ``f_func`` is evaluated on the fine grid from Cartesian normals, so the
    result measures how well the discrete state solves the continuous equation.
    """
    hf = ScalarField(fine, h.grid.resample(h.values, fine))
    ff = ScalarField(fine, fine.evaluate_xyz(f_func))
    return residual(hf, ff, model, k)
