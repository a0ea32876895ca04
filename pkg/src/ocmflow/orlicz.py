"""Weight functions phi(s) > 0 and sampled checks of the flow hypotheses.

``log_slope`` is g(s) = s phi'(s) / phi(s) and ``antiderivative`` is
Phi(s) = int_0^s dt / phi(t).  Hypotheses are certified by sampling on a
logarithmic grid; a report records the sampled range and a witness for every
failed clause.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

SLOPE_TOL = 1e-9


@dataclass(frozen=True)
class OrliczModel:
    """phi(s) = s**(1 - p) for ``kind == "power"``, else the supplied callables.

    ``a`` is the lower end of the admissible log-slope band; ``alpha``,
    ``epsilon`` and ``s0`` parametrize the growth bound
    phi(s) > alpha * s**(-k - epsilon) on (0, s0].
    """

    kind: str = "power"
    p: float = 2.0
    a: float = 1.0
    alpha: float = 1e-3
    epsilon: float = 0.1
    s0: float = 1.0
    func: Optional[Callable] = field(default=None, compare=False)
    derivative: Optional[Callable] = field(default=None, compare=False)
    antiderivative_func: Optional[Callable] = field(default=None, compare=False)
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("power", "custom"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.kind == "custom" and self.func is None:
            raise ValueError("custom model requires func")

    @classmethod
    def power(cls, p: float, a: float | None = None, **kw) -> "OrliczModel":
        return cls(kind="power", p=float(p), a=float(p - 1.0 if a is None else a), **kw)

    @classmethod
    def custom(cls, func, derivative=None, antiderivative=None, **kw) -> "OrliczModel":
        return cls(kind="custom", func=func, derivative=derivative, antiderivative_func=antiderivative, **kw)

    def describe(self) -> str:
        if self.kind == "power":
            return f"power p={self.p!r} a={self.a!r}"
        return f"custom {self.name or getattr(self.func, '__name__', 'phi')} a={self.a!r}"

    # -- evaluation ---------------------------------------------------------

    def phi(self, s):
        s = _positive(s)
        if self.kind == "power":
            return s ** (1.0 - self.p)
        return np.asarray(self.func(s), dtype=float)

    def phi_prime(self, s):
        s = _positive(s)
        if self.kind == "power":
            return (1.0 - self.p) * s ** (-self.p)
        if self.derivative is not None:
            return np.asarray(self.derivative(s), dtype=float)
        # 4th-order central difference with relative step
        eps = 1e-3 * s
        f = self.func
        return (f(s - 2 * eps) - 8 * f(s - eps) + 8 * f(s + eps) - f(s + 2 * eps)) / (12 * eps)

    def log_slope(self, s):
        s = _positive(s)
        if self.kind == "power":
            return np.full_like(np.asarray(s, dtype=float), 1.0 - self.p)
        return s * self.phi_prime(s) / self.phi(s)

    def antiderivative(self, s):
        """Phi(s) = int_0^s dt / phi(t)."""
        s = _positive(s)
        if self.kind == "power":
            if self.p <= 0:
                raise ValueError(f"int_0^s t^(p-1) dt diverges at 0 for p={self.p}")
            return s**self.p / self.p
        if self.antiderivative_func is not None:
            return np.asarray(self.antiderivative_func(s), dtype=float)
        if np.ndim(s) == 0:
            return _quad_from_zero(lambda t: 1.0 / float(self.func(t)), float(s))
        return np.vectorize(lambda x: _quad_from_zero(lambda t: 1.0 / float(self.func(t)), x))(s)


def _positive(s):
    arr = np.asarray(s, dtype=float)
    if np.any(~(arr > 0)):
        raise ValueError("phi is only defined for s > 0")
    return arr if arr.ndim else float(arr)


def _quad_from_zero(g: Callable[[float], float], s: float, rtol: float = 1e-12) -> float:
    """int_0^s g, summed over dyadic pieces [s 2^-(j+1), s 2^-j] toward 0."""
    total, pieces = 0.0, []
    for j in range(200):
        hi, lo = s * 2.0**-j, s * 2.0 ** -(j + 1)
        piece, _ = integrate.quad(g, lo, hi, epsabs=0.0, epsrel=rtol, limit=200)
        total += piece
        pieces.append(abs(piece))
        if j >= 8 and max(pieces[-4:]) <= 1e-17 * abs(total):
            return total
    if len(pieces) > 8 and pieces[-1] >= 0.5 * pieces[-9]:
        raise ValueError("int_0^s ds/phi does not converge at 0")
    return total


def phi(model: OrliczModel, s):
    return model.phi(s)


def phi_prime(model: OrliczModel, s):
    return model.phi_prime(s)


def log_slope(model: OrliczModel, s):
    return model.log_slope(s)


def phi_antiderivative(model: OrliczModel, s):
    return model.antiderivative(s)


# -- hypothesis checking ----------------------------------------------------


@dataclass
class Clause:
    name: str
    passed: bool
    detail: str
    witness: Optional[tuple[float, float]] = None  # (s, offending value)


@dataclass
class HypothesisReport:
    mode: str
    k: int
    model: str
    s_range: tuple[float, float]
    n_samples: int
    clauses: list[Clause]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.clauses)

    def clause(self, name: str) -> Clause:
        return next(c for c in self.clauses if c.name == name)

    def lines(self) -> list[str]:
        out = [f"hypotheses ({self.mode}, k={self.k}, {self.model}) on s in "
               f"[{self.s_range[0]:g}, {self.s_range[1]:g}], {self.n_samples} samples"]
        for c in self.clauses:
            w = "" if c.witness is None else f"  witness s={c.witness[0]:.6g} value={c.witness[1]:.6g}"
            out.append(f"  [{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail}{w}")
        return out


def _first_bad(s, bad, values):
    i = int(np.argmax(bad))
    return float(s[i]), float(values[i])


def check_hypotheses(
    model: OrliczModel,
    k: int,
    mode: str = "thm1",
    s_range: tuple[float, float] = (1e-4, 1e4),
    n_samples: int = 241,
) -> HypothesisReport:
    """Sample the hypotheses on phi needed for convergence.

    ``thm1`` checks -a <= g <= -1, ``thm2`` (f == 1) only g <= -1; both check
    that g is nondecreasing, the growth bound near 0 and that Phi is unbounded.
    """
    if mode not in ("thm1", "thm2"):
        raise ValueError(f"mode must be 'thm1' or 'thm2', got {mode!r}")
    n_samples = max(n_samples, 200)
    s = np.logspace(np.log10(s_range[0]), np.log10(s_range[1]), n_samples)
    clauses = []

    vals = model.phi(s)
    bad = ~(vals > 0) | ~np.isfinite(vals)
    clauses.append(Clause("positive", not bad.any(), "phi(s) > 0",
                          _first_bad(s, bad, vals) if bad.any() else None))

    g = model.log_slope(s)
    bad = g > -1.0 + SLOPE_TOL
    clauses.append(Clause("log_slope_upper", not bad.any(), "s (log phi)' <= -1",
                          _first_bad(s, bad, g) if bad.any() else None))
    if mode == "thm1":
        bad = g < -model.a - SLOPE_TOL
        clauses.append(Clause("log_slope_lower", not bad.any(), f"s (log phi)' >= -a = {-model.a:g}",
                              _first_bad(s, bad, g) if bad.any() else None))

    dg = np.diff(g)
    bad = np.concatenate([dg < -SLOPE_TOL * np.maximum(1.0, np.abs(g[1:])), [False]])
    clauses.append(Clause("log_slope_monotone", not bad.any(), "(s (log phi)')' >= 0",
                          _first_bad(s, bad, np.concatenate([dg, [0.0]])) if bad.any() else None))

    s_low = np.logspace(np.log10(s_range[0]), np.log10(model.s0), n_samples)
    bound = model.alpha * s_low ** (-k - model.epsilon)
    ratio = model.phi(s_low) / bound
    bad = ~(ratio > 1.0)
    clauses.append(Clause(
        "growth_near_zero", not bad.any(),
        f"phi(s) > {model.alpha:g} s^(-{k}-{model.epsilon:g}) on [{s_range[0]:g}, {model.s0:g}]",
        _first_bad(s_low, bad, ratio) if bad.any() else None))

    clauses.append(_antiderivative_clause(model, s))
    return HypothesisReport(mode, k, model.describe(), (float(s[0]), float(s[-1])), n_samples, clauses)


def _antiderivative_clause(model: OrliczModel, s: np.ndarray) -> Clause:
    try:
        decades = np.array([s[-1] / 100.0, s[-1] / 10.0, s[-1]])
        big = np.array([float(model.antiderivative(x)) for x in decades])
    except ValueError as exc:
        return Clause("antiderivative_unbounded", False, f"Phi not integrable at 0 ({exc})")
    inc_prev, inc_last = big[1] - big[0], big[2] - big[1]
    ratio = inc_last / inc_prev if inc_prev > 0 else 0.0
    # geometric decay of decade increments means Phi converges
    unbounded = inc_last > 0 and ratio >= 0.99
    if unbounded:
        detail = f"Phi grows without bound (decade increment ratio {ratio:.3g})"
    else:
        limit = big[2] + (inc_last * ratio / (1 - ratio) if 0 < ratio < 1 else 0.0)
        detail = f"Phi appears bounded, extrapolated limit {limit:.6g}"
    return Clause("antiderivative_unbounded", unbounded, detail, None if unbounded else (float(s[-1]), float(big[2])))
