"""Cross-checks of the main pipeline against the independent oracles.

Each check returns an :class:`OracleReport`; ``run_suite`` collects the fast
ones for the ``validate`` subcommand.
"""
from __future__ import annotations

import numpy as np

from .diagnostics import J_functional
from .flow import FlowConfig, FlowState, advance_to
from .geometry import body_geometry, curvature_bundle, radii_matrix
from .oracles import (OracleReport, axisymmetric_reduction, axisymmetric_theta, circle_reference_flow,
                      compare, sphere_integral, symbolic_radii_matrix)
from .orlicz import OrliczModel
from .sphere import ScalarField, build_grid


def quadrature_check(n_lat: int = 16) -> OracleReport:
    grid = build_grid(2, n_lat, 2 * n_lat)
    got = grid.integrate(grid.evaluate(lambda t, p: np.cos(t) ** 2))
    return compare("quadrature of cos^2", got, 4 * np.pi / 3, 1e-13, n_lat=n_lat)


def symbolic_hessian_check(n_lat: int = 32, lat_scheme: str = "legendre") -> OracleReport:
    """Radii matrix of a non-axisymmetric degree-3 field against sympy."""
    def expr(t, p, sp):
        x, y, z = sp.sin(t) * sp.cos(p), sp.sin(t) * sp.sin(p), sp.cos(t)
        return 2 + 0.1 * x * y + 0.05 * z**3 - 0.07 * x * z + 0.03 * y**2 * x

    grid = build_grid(2, n_lat, 2 * n_lat, lat_scheme)
    th, ph = grid.angles
    ref = symbolic_radii_matrix(expr)(th, ph)
    h = np.broadcast_to(ref[0], grid.shape)
    _, b = radii_matrix(grid, h)
    got = np.stack([b[0, 0], b[0, 1], b[1, 1]])
    want = np.stack([np.broadcast_to(r, grid.shape) for r in ref[3:]])
    return compare("radii matrix vs symbolic", got, want, 1e-8, n_lat=n_lat, scheme=lat_scheme)


def ellipsoid_check(n_lat: int = 64, k: int = 1) -> OracleReport:
    """sigma_k of the ellipsoid h = sqrt(sin^2 + 4 cos^2) against the 1-D reduction."""
    h_of = lambda t: np.sqrt(np.sin(t) ** 2 + 4 * np.cos(t) ** 2)  # noqa: E731
    grid = build_grid(2, n_lat, 2 * n_lat)
    h = ScalarField(grid, grid.evaluate(lambda t, p: h_of(t) + 0 * p))
    got = curvature_bundle(h, k).sigma_k.values[:, 0]
    M = 512
    _, _, want = axisymmetric_reduction(h_of(axisymmetric_theta(M)), k, grid.theta)
    return compare(f"ellipsoid sigma_{k} vs axisymmetric reduction", got, want, 1e-6, n_lat=n_lat, M=M)


def J_quadrature_check(n_lat: int = 32) -> OracleReport:
    """J of the perturbed sphere against adaptive quadrature."""
    r = lambda t: 1 + 0.1 * (3 * np.cos(t) ** 2 - 1) / 2  # noqa: E731
    grid = build_grid(2, n_lat, 2 * n_lat)
    model = OrliczModel.power(2.0)
    h = ScalarField(grid, grid.evaluate(lambda t, p: r(t) + 0 * p))
    f = ScalarField(grid, np.ones(grid.shape))
    want = sphere_integral(lambda t, p: r(t) ** 2 / 2, axisymmetric=True)
    return compare("J of perturbed sphere vs adaptive quadrature", J_functional(h, f, model), want, 1e-9,
                   n_lat=n_lat)


def mesh_sphere_check(n_lat: int = 16) -> OracleReport:
    grid = build_grid(2, n_lat, 2 * n_lat)
    X = body_geometry(ScalarField(grid, np.ones(grid.shape))).X
    return compare("embedding of unit sphere", np.linalg.norm(X, axis=-1), 1.0, 1e-12, n_lat=n_lat)


def circle_flow_check(n: int = 256, t_final: float = 1.0, ref_dt: float = 1e-4,
                      save_times=(0.25, 0.5, 0.75)) -> OracleReport:
    """flow_engine on S^1 against the independent Fourier/RK4 reference."""
    grid = build_grid(1, n_lon=n)
    h0 = 1 + 0.1 * np.cos(2 * grid.theta)
    model = OrliczModel.power(2.0)
    f = ScalarField(grid, np.ones(grid.shape))
    cfg = FlowConfig(k=1, model=model, f=f, dt0=ref_dt, dt_max=1e-2)
    times, ref = circle_reference_flow(h0, model.phi, np.ones(n), t_final, ref_dt, save_times)
    state, got = FlowState(ScalarField(grid, h0), dt=cfg.dt0), []
    for t in times:
        state = advance_to(state, cfg, float(t))
        got.append(state.h.values)
    return compare("S^1 trajectory vs reference flow", np.array(got), ref, 1e-6, n=n, t_final=t_final,
                   ref_dt=ref_dt)


def run_suite() -> list[OracleReport]:
    return [
        quadrature_check(),
        symbolic_hessian_check(),
        ellipsoid_check(),
        J_quadrature_check(),
        mesh_sphere_check(),
        circle_flow_check(t_final=0.5, save_times=(0.25,)),
    ]
