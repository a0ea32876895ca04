"""Slow, independent reference computations.

Nothing here imports the differentiation, geometry or flow code; oracles
work on raw numpy arrays and plain callables so they can check that code.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate


@dataclass
class OracleReport:
    name: str
    max_abs_error: float
    max_rel_error: float
    tolerance: float
    resolution: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.max_abs_error <= self.tolerance or self.max_rel_error <= self.tolerance

    def line(self) -> str:
        res = ", ".join(f"{k}={v}" for k, v in self.resolution.items())
        return (f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: abs {self.max_abs_error:.3e} "
                f"rel {self.max_rel_error:.3e} (tol {self.tolerance:g}; {res})")


def compare(name: str, got, want, tolerance: float, **resolution) -> OracleReport:
    got, want = np.asarray(got, dtype=float), np.asarray(want, dtype=float)
    err = np.abs(got - want)
    scale = np.maximum(np.abs(want), np.finfo(float).tiny)
    return OracleReport(name, float(err.max()), float((err / scale).max()), tolerance, resolution)


# -- quadrature -----------------------------------------------------------------


def sphere_integral(func: Callable[[float, float], float], axisymmetric: bool = False) -> float:
    """Adaptive quadrature of func(theta, phi) sin(theta) over S^2."""
    if axisymmetric:
        val, _ = integrate.quad(lambda t: func(t, 0.0) * np.sin(t), 0.0, np.pi, epsabs=1e-14, epsrel=1e-13)
        return 2.0 * np.pi * val
    val, _ = integrate.dblquad(lambda t, p: func(t, p) * np.sin(t), 0.0, 2 * np.pi, 0.0, np.pi,
                               epsabs=1e-13, epsrel=1e-12)
    return val


# -- symbolic differentiation ---------------------------------------------------


def symbolic_radii_matrix(expr_builder: Callable):
    """Lambdified covariant Hessian + h I for h given symbolically in (theta, phi).

    ``expr_builder(theta, phi, sympy)`` returns a sympy expression.  The result
    maps arrays (theta, phi) to (b11, b12, b22) in the frame
    (d_theta, (1/sin theta) d_phi).
    """
    import sympy as sp

    t, p = sp.symbols("theta phi", real=True)
    h = expr_builder(t, p, sp)
    h_t, h_p = sp.diff(h, t), sp.diff(h, p)
    b11 = sp.diff(h, t, 2) + h
    b12 = (sp.diff(h, t, p) - sp.cos(t) / sp.sin(t) * h_p) / sp.sin(t)
    b22 = sp.diff(h, p, 2) / sp.sin(t) ** 2 + sp.cos(t) / sp.sin(t) * h_t + h
    grad = (h_t, h_p / sp.sin(t))
    raw = sp.lambdify((t, p), [h, grad[0], grad[1], b11, b12, b22], "numpy")

    def evaluate(theta, phi):
        # constant entries come back as scalars; give every entry the node shape
        out = raw(theta, phi)
        shape = np.broadcast(np.asarray(theta), np.asarray(phi)).shape
        return [np.broadcast_to(np.asarray(v, dtype=float), shape) for v in out]
    return evaluate


# -- axisymmetric reduction -----------------------------------------------------


def _periodic_extension(samples: np.ndarray) -> np.ndarray:
    # samples at theta_j = (j + 1/2) pi / M; even reflection through both poles
    return np.concatenate([samples, samples[::-1]])


def axisymmetric_reduction(h_samples: np.ndarray, k: int, theta_eval: Optional[np.ndarray] = None):
    """Principal radii and sigma_k of an axisymmetric support function on S^2.

    ``h_samples`` are values at theta_j = (j + 1/2) pi / M, j < M (poles
    excluded).  The even reflection through both poles is 2 pi periodic, so
    Fourier differentiation is spectrally accurate.  Radii are
    (h_tt + h, cot(theta) h_t + h).  Returns ``(theta, radii, sigma_k)``; with
    ``theta_eval`` the trigonometric interpolant is evaluated there instead.
    """
    h_samples = np.asarray(h_samples, dtype=float)
    M = h_samples.size
    ext = _periodic_extension(h_samples)
    L = ext.size
    psi = (np.arange(L) + 0.5) * np.pi / M
    coef = np.fft.rfft(ext) / L
    m = np.arange(coef.size)
    # shift the half-cell offset into the coefficients
    coef = coef * np.exp(-1j * m * 0.5 * np.pi / M)
    weight = np.full(coef.size, 2.0)
    weight[0] = 1.0
    if L % 2 == 0:
        weight[-1] = 1.0
    theta = psi[:M] if theta_eval is None else np.asarray(theta_eval, dtype=float)
    phase = np.exp(1j * np.outer(theta, m)) * weight
    h = np.real(phase @ coef)
    h_t = np.real(phase @ (1j * m * coef))
    h_tt = np.real(phase @ (-(m**2) * coef))
    r1 = h_tt + h
    r2 = np.cos(theta) / np.sin(theta) * h_t + h
    radii = np.stack([r1, r2], axis=-1)
    if k == 1:
        sigma = 0.5 * (r1 + r2)
    elif k == 2:
        sigma = r1 * r2
    else:
        raise ValueError("k must be 1 or 2 on S^2")
    return theta, radii, sigma


def axisymmetric_theta(M: int) -> np.ndarray:
    return (np.arange(M) + 0.5) * np.pi / M


# -- S^1 reference flow ---------------------------------------------------------


def circle_reference_flow(
    h0: np.ndarray,
    phi: Callable[[np.ndarray], np.ndarray],
    f: np.ndarray,
    t_final: float,
    dt: float,
    save_times: Sequence[float] = (),
):
    """Curve flow dh/dt = (h'' + h) phi(h) h eta / f - h on a uniform S^1 grid.

    Fourier derivatives, trapezoid quadrature, fixed-step RK4 (the last step is
    shortened to land on each save time).  Returns ``(times, states)``.
    """
    h = np.array(h0, dtype=float)
    n = h.size
    f = np.broadcast_to(np.asarray(f, dtype=float), h.shape)
    wav = np.fft.rfftfreq(n, 1.0 / n)

    def rhs(u):
        u_hat = np.fft.rfft(u)
        u_xx = np.fft.irfft(-(wav**2) * u_hat, n)
        sigma = u_xx + u
        ph = phi(u)
        eta = np.sum(u * f / ph) / np.sum(u * sigma)
        if not np.all(u > 0) or not np.all(sigma > 0):
            raise RuntimeError("reference flow left the convex cone")
        return sigma * ph * u * eta / f - u

    targets = sorted(set(float(s) for s in save_times) | {float(t_final)})
    times, states = [], []
    t = 0.0
    for target in targets:
        while t < target - 1e-14:
            step = min(dt, target - t)
            k1 = rhs(h)
            k2 = rhs(h + 0.5 * step * k1)
            k3 = rhs(h + 0.5 * step * k2)
            k4 = rhs(h + step * k3)
            h = h + step / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += step
        t = target
        times.append(target)
        states.append(h.copy())
    return np.array(times), np.array(states)


# -- refinement studies -----------------------------------------------------------


@dataclass
class RefinementStudy:
    resolutions: list
    errors: list
    orders: list  # pairwise observed orders
    fitted_order: float
    monotone: bool

    def line(self, name: str) -> str:
        errs = ", ".join(f"{e:.3e}" for e in self.errors)
        flag = "" if self.monotone else " [non-monotone]"
        orders = ", ".join(f"{o:.2f}" for o in self.orders)
        return f"{name}: errors [{errs}] pairwise orders [{orders}] fit {self.fitted_order:.2f}{flag}"


def refinement_study(error_at: Callable[[float], float], resolutions: Sequence[float]) -> RefinementStudy:
    """Observed convergence order of ``error_at(resolution)``.

    ``resolutions`` grow (e.g. n_lat) or shrink (e.g. dt); orders are reported
    positive when the error decreases along the sequence.
    """
    res = [float(r) for r in resolutions]
    if len(res) < 3:
        raise ValueError("need at least 3 resolutions")
    errs = [float(error_at(r)) for r in res]
    logs_r = np.log(res)
    logs_e = np.log(np.maximum(errs, np.finfo(float).tiny))
    sign = 1.0 if res[-1] > res[0] else -1.0
    orders = [float(-(logs_e[i + 1] - logs_e[i]) / abs(logs_r[i + 1] - logs_r[i])) for i in range(len(res) - 1)]
    slope = np.polyfit(logs_r, logs_e, 1)[0]
    monotone = all(errs[i + 1] < errs[i] for i in range(len(errs) - 1))
    return RefinementStudy(res, errs, orders, float(-sign * slope), monotone)
