"""Pointwise convex geometry of a body given by its support function h.

The matrix of principal radii is b = Hess(h) + h I in the orthonormal frame of
:mod:`ocmflow.sphere`; sigma_k is the k-th elementary symmetric function of its
eigenvalues divided by C(n-1, k), so sigma_k(1, ..., 1) = 1.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .sphere import ScalarField, SphericalGrid


@dataclass(frozen=True, eq=False)
class CurvatureBundle:
    grid: SphericalGrid
    k: int
    b: np.ndarray  # (dim, dim, *shape)
    radii: np.ndarray  # (*shape, dim), ascending
    sigma_k: ScalarField
    min_radius: float

    @property
    def curvatures(self) -> np.ndarray:
        """Principal curvatures 1/radii (only meaningful for convex states)."""
        return 1.0 / self.radii


@dataclass(frozen=True, eq=False)
class BodyGeometry:
    h: ScalarField
    grad: np.ndarray  # (dim, *shape)
    rho: ScalarField
    X: np.ndarray  # (*shape, n)


def radii_matrix(grid: SphericalGrid, h: np.ndarray, lon_filter: str = "none"):
    """Return (grad h, b) with b = Hess(h) + h I."""
    grad, hess = grid.derivatives(h, lon_filter)
    b = hess.copy()
    for i in range(grid.dim):
        b[i, i] += h
    return grad, b


def eigen_radii(b: np.ndarray) -> np.ndarray:
    """Closed-form ascending eigenvalues of a 1x1 or symmetric 2x2 field."""
    if b.shape[0] == 1:
        return b[0, 0][..., None]
    mean = 0.5 * (b[0, 0] + b[1, 1])
    disc = np.hypot(0.5 * (b[0, 0] - b[1, 1]), b[0, 1])
    return np.stack([mean - disc, mean + disc], axis=-1)


def sigma_k_matrix(b: np.ndarray, k: int) -> np.ndarray:
    """Normalized sigma_k of a (dim, dim, ...) matrix field via trace/determinant."""
    d = b.shape[0]
    _check_k(d, k)
    if k == 1:
        return np.trace(b, axis1=0, axis2=1) / d
    return b[0, 0] * b[1, 1] - b[0, 1] * b[1, 0]


def sigma_k_value(radii, k: int):
    """e_k(radii) / C(n-1, k) for a radii list (last axis)."""
    radii = np.asarray(radii, dtype=float)
    d = radii.shape[-1]
    _check_k(d, k)
    # e_k from the generating polynomial prod(1 + r t)
    e = [np.ones(radii.shape[:-1])] + [np.zeros(radii.shape[:-1]) for _ in range(d)]
    for i in range(d):
        r = radii[..., i]
        for j in range(i + 1, 0, -1):
            e[j] = e[j] + r * e[j - 1]
    return e[k] / comb(d, k)


def sigma_k_gradient(b: np.ndarray, k: int) -> np.ndarray:
    """d sigma_k / d b_ij, same shape as ``b``.

    Only sizes 1 and 2 are supported; for k = 2 this is the cofactor matrix.
    """
    b = np.asarray(b, dtype=float)
    d = b.shape[0]
    if d not in (1, 2) or b.shape[1] != d:
        raise ValueError(f"sigma_k_gradient supports 1x1 and 2x2 matrices, got {b.shape[:2]}")
    _check_k(d, k)
    out = np.zeros_like(b)
    if k == 1:
        for i in range(d):
            out[i, i] = 1.0 / d
        return out
    out[0, 0] = b[1, 1]
    out[1, 1] = b[0, 0]
    out[0, 1] = -b[1, 0]
    out[1, 0] = -b[0, 1]
    return out


def _check_k(d: int, k: int) -> None:
    if not 1 <= k <= d:
        raise ValueError(f"k must satisfy 1 <= k <= n-1 = {d}, got {k}")


def curvature_bundle(h: ScalarField, k: int, lon_filter: str = "none") -> CurvatureBundle:
    grid = h.grid
    _, b = radii_matrix(grid, h.values, lon_filter)
    radii = eigen_radii(b)
    sigma = sigma_k_value(radii, k)
    return CurvatureBundle(grid, k, b, radii, ScalarField(grid, sigma), float(radii[..., 0].min()))


def body_geometry(h: ScalarField, lon_filter: str = "none") -> BodyGeometry:
    grid = h.grid
    grad = grid.derivatives(h.values, lon_filter)[0]
    rho = np.sqrt(h.values**2 + np.sum(grad**2, axis=0))
    X = h.values[..., None] * grid.points + np.einsum("i...,i...n->...n", grad, grid.frame)
    return BodyGeometry(h, grad, ScalarField(grid, rho), X)


def convexity_margin(bundle: CurvatureBundle, h: ScalarField) -> tuple[float, float]:
    """(min principal radius, min h); both positive iff strictly convex around the origin."""
    return bundle.min_radius, float(h.values.min())
