"""Discretization of the unit circle S^1 and the unit sphere S^2.

S^2 uses Gauss-Legendre latitudes (nodes in cos(theta)) times uniform
longitudes; S^1 uses a uniform periodic grid.  Fields are plain numpy arrays
of shape ``grid.shape``; :class:`ScalarField` pairs such an array with its grid.

Longitudinal derivatives are pseudo-spectral (FFT).  Latitudinal derivatives
follow each meridian through the poles: the value at the reflected latitude
is read from the column shifted by pi.  Splitting a column pair into its even
and odd parts across the pole gives

    even(theta) = p(cos theta),    odd(theta) = sin(theta) q(cos theta),

so the default ``"legendre"`` scheme differentiates the polynomial
interpolants p, q through the Gauss-Legendre nodes.  The ``"fd4"`` scheme uses
5-point centered finite differences on the same pole-crossing meridian.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import pi

import numpy as np

LAT_SCHEMES = ("legendre", "fd4")
LON_FILTERS = ("none", "polar", "two_thirds")


def fornberg_weights(x0: float, x: np.ndarray, m: int) -> np.ndarray:
    """Finite-difference weights for derivatives 0..m at ``x0`` on nodes ``x``."""
    n = len(x)
    c = np.zeros((n, m + 1))
    c1, c4 = 1.0, x[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2, c5, c4 = 1.0, c4, x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c


def _poly_diff_matrix(x: np.ndarray) -> np.ndarray:
    """Barycentric differentiation matrix of the interpolant through ``x``."""
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    w = 1.0 / np.prod(diff, axis=1)
    d = (w[None, :] / w[:, None]) / diff
    np.fill_diagonal(d, 0.0)
    np.fill_diagonal(d, -d.sum(axis=1))
    return d


@dataclass(frozen=True, eq=False)
class SphericalGrid:
    """Nodes, quadrature weights and differentiation operators on S^dim.

    For ``dim == 2`` arrays are indexed ``[latitude, longitude]`` with the
    polar angle increasing along axis 0.  For ``dim == 1`` arrays are 1-D.
    """

    dim: int
    n_lat: int
    n_lon: int
    lat_scheme: str = "legendre"
    theta: np.ndarray = field(init=False, repr=False)
    phi: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.dim == 1:
            theta = 2.0 * pi * np.arange(self.n_lon) / self.n_lon
            phi = np.zeros(0)
            weights = np.full(self.n_lon, 2.0 * pi / self.n_lon)
        else:
            x, w = np.polynomial.legendre.leggauss(self.n_lat)
            x, w = x[::-1], w[::-1]
            theta = np.arccos(x)
            phi = 2.0 * pi * np.arange(self.n_lon) / self.n_lon
            weights = np.outer(w, np.full(self.n_lon, 2.0 * pi / self.n_lon))
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "weights", weights)
        for arr in (theta, phi, weights):
            arr.setflags(write=False)

    # -- geometry -------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_lon,) if self.dim == 1 else (self.n_lat, self.n_lon)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def n(self) -> int:
        """Ambient dimension."""
        return self.dim + 1

    @property
    def area(self) -> float:
        return 2.0 * pi if self.dim == 1 else 4.0 * pi

    @cached_property
    def angles(self) -> tuple[np.ndarray, ...]:
        """Per-node angle arrays: ``(theta,)`` or ``(theta, phi)``."""
        if self.dim == 1:
            return (self.theta,)
        return tuple(np.meshgrid(self.theta, self.phi, indexing="ij"))

    @cached_property
    def points(self) -> np.ndarray:
        """Unit normals x at every node, shape ``shape + (n,)``."""
        if self.dim == 1:
            return np.stack([np.cos(self.theta), np.sin(self.theta)], axis=-1)
        th, ph = self.angles
        return np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=-1)

    @cached_property
    def frame(self) -> np.ndarray:
        """Orthonormal tangent frame, shape ``(dim,) + shape + (n,)``."""
        if self.dim == 1:
            return np.stack([-np.sin(self.theta), np.cos(self.theta)], axis=-1)[None]
        th, ph = self.angles
        e1 = np.stack([np.cos(th) * np.cos(ph), np.cos(th) * np.sin(ph), -np.sin(th)], axis=-1)
        e2 = np.stack([-np.sin(ph), np.cos(ph), np.zeros_like(ph)], axis=-1)
        return np.stack([e1, e2])

    def evaluate(self, func) -> np.ndarray:
        """Sample ``func(*angles)`` on the grid."""
        return np.broadcast_to(np.asarray(func(*self.angles), dtype=float), self.shape).copy()

    def evaluate_xyz(self, func) -> np.ndarray:
        """Sample ``func(x)`` with x the Cartesian unit normal (last axis)."""
        return np.broadcast_to(np.asarray(func(self.points), dtype=float), self.shape).copy()

    # -- quadrature ------------------------------------------------------

    def integrate(self, values: np.ndarray) -> float:
        return float(np.sum(self.weights * values))

    # -- longitudinal spectral machinery ---------------------------------

    @cached_property
    def _wavenumbers(self) -> np.ndarray:
        return np.arange(self.n_lon // 2 + 1, dtype=float)

    def lon_cutoff(self, lon_filter: str) -> np.ndarray:
        """Highest retained longitudinal wavenumber per latitude ring."""
        half = self.n_lon // 2
        if self.dim == 1:
            rings = 1
            sin_t = np.ones(1)
        else:
            rings = self.n_lat
            sin_t = np.sin(self.theta)
        if lon_filter == "none":
            return np.full(rings, half)
        if lon_filter == "two_thirds":
            return np.full(rings, self.n_lon // 3)
        if lon_filter == "polar":
            return np.minimum(half, np.maximum(1, np.ceil(sin_t * half))).astype(int)
        raise ValueError(f"unknown longitudinal filter {lon_filter!r}")

    def _lon_multipliers(self, lon_filter: str):
        cache = self.__dict__.setdefault("_lon_mult_cache", {})
        if lon_filter not in cache:
            m = self._wavenumbers
            cut = self.lon_cutoff(lon_filter)
            mask = (m[None, :] <= cut[:, None]).astype(float)
            d1 = 1j * m
            if self.n_lon % 2 == 0:
                d1 = d1.copy()
                d1[-1] = 0.0
            d2 = -(m**2)
            if self.dim == 1:
                mask = mask[0]
            cache[lon_filter] = (d1 * mask, d2 * mask, mask)
        return cache[lon_filter]

    def lon_derivatives(self, values: np.ndarray, lon_filter: str = "none"):
        """Return (d/dphi, d^2/dphi^2) along the periodic axis."""
        d1, d2, _ = self._lon_multipliers(lon_filter)
        spec = np.fft.rfft(values, axis=-1)
        n = self.n_lon
        return np.fft.irfft(spec * d1, n=n, axis=-1), np.fft.irfft(spec * d2, n=n, axis=-1)

    def lon_smooth(self, values: np.ndarray, lon_filter: str) -> np.ndarray:
        """Drop the longitudinal modes removed by ``lon_filter``."""
        if lon_filter == "none":
            return values
        _, _, mask = self._lon_multipliers(lon_filter)
        return np.fft.irfft(np.fft.rfft(values, axis=-1) * mask, n=self.n_lon, axis=-1)

    # -- latitudinal machinery (dim 2) -----------------------------------

    @cached_property
    def _lat_matrices(self):
        """(even d1, even d2, odd d1, odd d2) acting on column-pair parts."""
        theta = self.theta
        s, c = np.sin(theta), np.cos(theta)
        if self.lat_scheme == "legendre":
            p1 = _poly_diff_matrix(c)
            p2 = p1 @ p1
            de1 = -s[:, None] * p1
            de2 = (s**2)[:, None] * p2 - c[:, None] * p1
            inv_s = 1.0 / s
            do1 = (np.diag(c) - (s**2)[:, None] * p1) * inv_s[None, :]
            do2 = (np.diag(-s) - (3 * s * c)[:, None] * p1 + (s**3)[:, None] * p2) * inv_s[None, :]
            return de1, de2, do1, do2
        if self.lat_scheme == "fd4":
            n = self.n_lat
            # extended meridian: ghosts -theta_2, -theta_1 | nodes | 2pi - theta_n, 2pi - theta_{n-1}
            ext = np.concatenate([-theta[1::-1], theta, 2 * pi - theta[:-3:-1]])
            src = np.concatenate([[1, 0], np.arange(n), [n - 1, n - 2]])
            sign = np.concatenate([[-1, -1], np.ones(n), [-1, -1]])
            mats = [np.zeros((n, n)) for _ in range(4)]
            for i in range(n):
                sl = slice(i, i + 5)
                w = fornberg_weights(theta[i], ext[sl], 2)
                for col, sg, w1, w2 in zip(src[sl], sign[sl], w[:, 1], w[:, 2]):
                    mats[0][i, col] += w1
                    mats[1][i, col] += w2
                    mats[2][i, col] += sg * w1
                    mats[3][i, col] += sg * w2
            return tuple(mats)
        raise ValueError(f"unknown latitudinal scheme {self.lat_scheme!r}")

    def lat_derivatives(self, values: np.ndarray):
        """Return (d/dtheta, d^2/dtheta^2) across the poles."""
        de1, de2, do1, do2 = self._lat_matrices
        partner = np.roll(values, self.n_lon // 2, axis=1)
        even = 0.5 * (values + partner)
        odd = 0.5 * (values - partner)
        return de1 @ even + do1 @ odd, de2 @ even + do2 @ odd

    def lat_derivative(self, values: np.ndarray) -> np.ndarray:
        de1, _, do1, _ = self._lat_matrices
        partner = np.roll(values, self.n_lon // 2, axis=1)
        return de1 @ (0.5 * (values + partner)) + do1 @ (0.5 * (values - partner))

    @cached_property
    def lat_spectral_radius(self) -> float:
        """Largest |eigenvalue| of the 1-D latitudinal second-derivative operators."""
        _, de2, _, do2 = self._lat_matrices
        return float(max(np.abs(np.linalg.eigvals(de2)).max(), np.abs(np.linalg.eigvals(do2)).max()))

    def stiffness(self, lon_filter: str = "none") -> float:
        """Bound on the symbol of the tangential second-derivative operator."""
        cut = self.lon_cutoff(lon_filter).astype(float)
        if self.dim == 1:
            return float(cut[0] ** 2)
        return self.lat_spectral_radius + float(np.max(cut**2 / np.sin(self.theta) ** 2))

    # -- derivative bundles ---------------------------------------------

    def derivatives(self, values: np.ndarray, lon_filter: str = "none"):
        """Gradient (dim, *shape) and covariant Hessian (dim, dim, *shape)."""
        if self.dim == 1:
            d1, d2 = self.lon_derivatives(values, lon_filter)
            return d1[None], d2[None, None]
        h_t, h_tt = self.lat_derivatives(values)
        h_p, h_pp = self.lon_derivatives(values, lon_filter)
        h_tp = self.lat_derivative(h_p)
        th = self.theta[:, None]
        s, cot = np.sin(th), np.cos(th) / np.sin(th)
        grad = np.stack([h_t, h_p / s])
        h11 = h_tt
        h12 = (h_tp - cot * h_p) / s
        h22 = h_pp / s**2 + cot * h_t
        hess = np.stack([np.stack([h11, h12]), np.stack([h12, h22])])
        return grad, hess

    # -- interpolation ---------------------------------------------------

    def resample(self, values: np.ndarray, target: "SphericalGrid") -> np.ndarray:
        """Spectral interpolation of ``values`` onto the nodes of ``target``.

        Longitudinal Fourier interpolation and, on S^2, polynomial interpolation
        of the even/odd meridian parts in cos(theta).
        """
        if target.dim != self.dim:
            raise ValueError("grids of different dimension")
        if self.dim == 2:
            x_src, x_dst = np.cos(self.theta), np.cos(target.theta)
            s_src, s_dst = np.sin(self.theta), np.sin(target.theta)
            partner = np.roll(values, self.n_lon // 2, axis=1)
            even = 0.5 * (values + partner)
            odd = 0.5 * (values - partner) / s_src[:, None]
            interp = _lagrange_matrix(x_src, x_dst)
            values = interp @ even + s_dst[:, None] * (interp @ odd)
        return _fourier_resample(values, self.n_lon, target.n_lon)


def _lagrange_matrix(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Matrix evaluating the interpolant through nodes ``x`` at points ``y``."""
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    w = 1.0 / np.prod(diff, axis=1)
    dy = y[:, None] - x[None, :]
    exact = np.isclose(dy, 0.0, atol=1e-15)
    dy[exact] = 1.0
    m = w[None, :] / dy
    m /= m.sum(axis=1, keepdims=True)
    rows = exact.any(axis=1)
    m[rows] = exact[rows].astype(float)
    return m


def _fourier_resample(values: np.ndarray, n_src: int, n_dst: int) -> np.ndarray:
    spec = np.fft.rfft(values, axis=-1)
    out = np.zeros(values.shape[:-1] + (n_dst // 2 + 1,), dtype=complex)
    m = min(n_src, n_dst) // 2
    out[..., : m + 1] = spec[..., : m + 1]
    if n_src % 2 == 0 and n_dst > n_src:
        out[..., n_src // 2] *= 0.5
    return np.fft.irfft(out, n=n_dst, axis=-1) * (n_dst / n_src)


def build_grid(dim: int, n_lat: int | None = None, n_lon: int = 64, lat_scheme: str = "legendre") -> SphericalGrid:
    """Validated constructor for :class:`SphericalGrid`."""
    if dim not in (1, 2):
        raise ValueError(f"dim must be 1 or 2, got {dim}")
    if not isinstance(n_lon, (int, np.integer)) or n_lon < 16:
        raise ValueError(f"n_lon must be an integer >= 16, got {n_lon}")
    if dim == 2:
        if not isinstance(n_lat, (int, np.integer)) or n_lat < 8 or n_lat % 2:
            raise ValueError(f"n_lat must be an even integer >= 8, got {n_lat}")
        if n_lon % 2:
            raise ValueError(f"n_lon must be even on S^2, got {n_lon}")
    else:
        n_lat = 1
    if lat_scheme not in LAT_SCHEMES:
        raise ValueError(f"lat_scheme must be one of {LAT_SCHEMES}")
    return SphericalGrid(dim, int(n_lat), int(n_lon), lat_scheme)


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: SphericalGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise ValueError(f"field shape {values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", values)


def integrate(field: ScalarField) -> float:
    return field.grid.integrate(field.values)


def gradient(field: ScalarField) -> np.ndarray:
    """Components of grad h in the frame (d_theta, (1/sin theta) d_phi)."""
    return field.grid.derivatives(field.values)[0]


def covariant_hessian(field: ScalarField) -> np.ndarray:
    """Covariant Hessian in the orthonormal frame, shape (dim, dim, *shape)."""
    return field.grid.derivatives(field.values)[1]

