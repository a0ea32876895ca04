"""YAML run configuration with line-attributed validation.

Example::

    dim: 2
    n_lat: 32
    n_lon: 64
    k: 1
    phi: {kind: power, p: 2, a: 1}
    f: {kind: constant, params: {value: 1.0}}
    h0: {kind: sphere, params: {r: 1.0}}
    output: {dir: runs/sphere, every: 100}

``harmonic_sum`` data are ``(constant + sum coef * Y_lm) ** power`` and
``harmonic_perturbed_sphere`` is ``r + sum coef * Y_lm``, where Y_lm is the
unnormalized real harmonic P_l^|m|(cos theta) cos(m phi) (sin for m < 0).  On
S^1 a term is ``cos(m theta)`` (sin for m < 0) and ``l`` is ignored.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np
import yaml
from scipy.special import lpmv

from .flow import FlowConfig
from .orlicz import OrliczModel
from .sphere import LAT_SCHEMES, LON_FILTERS, ScalarField, SphericalGrid, build_grid

OUTPUT_DIR_ENV = "OCMFLOW_OUTPUT_DIR"

_TOP_KEYS = {
    "dim", "n_lat", "n_lon", "k", "phi", "f", "h0", "dt0", "dt_min", "dt_max", "step_cap_delta",
    "tol_stationary", "t_max", "step_max", "output", "lat_scheme", "lon_filter", "residual_bound",
}
_PHI_KEYS = {"kind", "p", "a", "alpha", "epsilon", "s0"}
_DATA_KEYS = {"kind", "params"}
_OUTPUT_KEYS = {"dir", "every"}
_F_KINDS = {"constant": {"value"}, "harmonic_sum": {"constant", "terms", "power"}, "file": {"path"}}
_H0_KINDS = {"sphere": {"r"}, "harmonic_perturbed_sphere": {"r", "terms"}, "file": {"path"}}


class ConfigError(ValueError):
    """Invalid configuration; ``key`` is a dotted path and ``line`` is 1-based."""

    def __init__(self, message: str, key: str = "", line: Optional[int] = None, source: str = ""):
        self.key, self.line, self.source = key, line, source
        where = f"{source}:{line}" if line is not None else source
        prefix = ", ".join(x for x in (where, f"key '{key}'" if key else "") if x)
        super().__init__(f"{prefix}: {message}" if prefix else message)


@dataclass
class RunSpec:
    """Everything a run needs, after validation."""

    flow: FlowConfig
    h0: ScalarField
    output_dir: Path
    output_every: int
    residual_bound: float
    echo: dict
    f_func: Optional[Callable] = field(default=None, repr=False)

    @property
    def grid(self) -> SphericalGrid:
        return self.flow.grid


# -- YAML with source positions ------------------------------------------------


def _construct(node, path: str, marks: dict):
    marks[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out = {}
        for key_node, value_node in node.value:
            key = key_node.value
            sub = f"{path}.{key}" if path else key
            if key in out:
                raise ConfigError("duplicate key", sub, key_node.start_mark.line + 1)
            marks[sub] = key_node.start_mark.line + 1
            out[key] = _construct(value_node, sub, marks)
            marks[sub] = key_node.start_mark.line + 1
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_construct(v, f"{path}[{i}]", marks) for i, v in enumerate(node.value)]
    return yaml.safe_load(yaml.serialize(node))


def load_yaml(text: str, source: str = "<config>") -> tuple[dict, dict]:
    """Parse YAML into plain data plus a map from dotted key to line number."""
    try:
        node = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"malformed YAML: {getattr(exc, 'problem', exc)}", "",
                          None if mark is None else mark.line + 1, source) from None
    if node is None:
        raise ConfigError("empty configuration", source=source)
    if not isinstance(node, yaml.MappingNode):
        raise ConfigError("top level must be a mapping", "", node.start_mark.line + 1, source)
    marks: dict[str, int] = {}
    try:
        data = _construct(node, "", marks)
    except ConfigError as exc:
        raise ConfigError(str(exc).split(": ", 1)[-1], exc.key, exc.line, source) from None
    return data, marks


# -- harmonic data ----------------------------------------------------------------


def _harmonic(dim: int, l: int, m: int) -> Callable:
    if dim == 1:
        return lambda x: np.cos(m * np.arctan2(x[..., 1], x[..., 0])) if m >= 0 else \
            np.sin(-m * np.arctan2(x[..., 1], x[..., 0]))

    def y(x):
        ct = np.clip(x[..., 2], -1.0, 1.0)
        lon = np.arctan2(x[..., 1], x[..., 0])
        trig = np.cos(m * lon) if m >= 0 else np.sin(-m * lon)
        return lpmv(abs(m), l, ct) * trig
    return y


def harmonic_function(dim: int, terms, constant: float = 0.0, power: float = 1.0) -> Callable:
    """``x -> (constant + sum coef * Y_lm(x)) ** power`` for Cartesian unit x."""
    parts = [(_harmonic(dim, int(l), int(m)), float(c)) for l, m, c in terms]

    def func(x):
        x = np.asarray(x, dtype=float)
        total = np.full(x.shape[:-1], float(constant))
        for y, c in parts:
            total = total + c * y(x)
        return total if power == 1.0 else total**power
    return func


# -- validation ---------------------------------------------------------------------


class _Validator:
    def __init__(self, data: dict, marks: dict, source: str, base: Path):
        self.data, self.marks, self.source, self.base = data, marks, source, base

    def fail(self, key: str, message: str):
        line = self.marks.get(key)
        if line is None and "." in key:
            line = self.marks.get(key.rsplit(".", 1)[0])
        raise ConfigError(message, key, line, self.source)

    def mapping(self, obj, key: str, allowed: set) -> dict:
        if not isinstance(obj, dict):
            self.fail(key, "expected a mapping")
        for name in obj:
            if name not in allowed:
                self.fail(f"{key}.{name}" if key else name, f"unknown key (allowed: {', '.join(sorted(allowed))})")
        return obj

    def get(self, obj: dict, key: str, name: str, kind, default=..., check=None, why=""):
        full = f"{key}.{name}" if key else name
        if name not in obj:
            if default is ...:
                self.fail(full if not key else key, f"missing required key '{name}'")
            return default
        value = obj[name]
        if kind is int:
            if isinstance(value, bool) or not isinstance(value, int):
                self.fail(full, f"expected an integer, got {value!r}")
        elif kind is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not np.isfinite(value):
                self.fail(full, f"expected a finite number, got {value!r}")
            value = float(value)
        elif kind is str and not isinstance(value, str):
            self.fail(full, f"expected a string, got {value!r}")
        if check is not None and not check(value):
            self.fail(full, f"{value!r} {why}")
        return value

    def terms(self, params: dict, key: str, dim: int) -> list:
        raw = params.get("terms", [])
        if not isinstance(raw, list):
            self.fail(f"{key}.terms", "expected a list of [l, m, coef] or {l, m, coef}")
        out = []
        for i, t in enumerate(raw):
            tk = f"{key}.terms[{i}]"
            if isinstance(t, dict):
                self.mapping(t, tk, {"l", "m", "coef"})
                l = self.get(t, tk, "l", int, 0 if dim == 1 else ...)
                m = self.get(t, tk, "m", int, 0)
                c = self.get(t, tk, "coef", float)
            elif isinstance(t, list) and len(t) == 3:
                l, m, c = t
                if not all(isinstance(v, int) and not isinstance(v, bool) for v in (l, m)):
                    self.fail(tk, "l and m must be integers")
                if isinstance(c, bool) or not isinstance(c, (int, float)):
                    self.fail(tk, "coef must be a number")
            else:
                self.fail(tk, "expected [l, m, coef] or {l, m, coef}")
            if dim == 2 and not (l >= 0 and abs(m) <= l):
                self.fail(tk, f"need l >= 0 and |m| <= l, got l={l}, m={m}")
            out.append((int(l), int(m), float(c)))
        return out

    def data_field(self, name: str, kinds: dict, grid: SphericalGrid):
        spec = self.mapping(self.data.get(name), name, _DATA_KEYS) if name in self.data else \
            self.fail(name, f"missing required section '{name}'")
        kind = self.get(spec, name, "kind", str, check=lambda v: v in kinds,
                        why=f"is not one of {', '.join(sorted(kinds))}")
        pkey = f"{name}.params"
        params = self.mapping(spec.get("params", {}) or {}, pkey, kinds[kind])
        func = None
        if kind == "file":
            from .io import read_field

            path = Path(self.get(params, pkey, "path", str))
            if not path.is_absolute():
                path = self.base / path
            try:
                fld, _ = read_field(path, grid)
            except (OSError, ValueError) as exc:
                self.fail(f"{pkey}.path", f"cannot load field dump: {exc}")
            values = fld.values
        elif kind == "constant":
            value = self.get(params, pkey, "value", float, 1.0)
            values = np.full(grid.shape, value)
            func = lambda x, v=value: np.full(np.shape(x)[:-1], v)  # noqa: E731
        elif kind == "sphere":
            r = self.get(params, pkey, "r", float, 1.0, lambda v: v > 0, "must be positive")
            values = np.full(grid.shape, r)
        else:
            terms = self.terms(params, pkey, grid.dim)
            if kind == "harmonic_sum":
                func = harmonic_function(grid.dim, terms, self.get(params, pkey, "constant", float, 1.0),
                                         self.get(params, pkey, "power", float, 1.0))
            else:
                func = harmonic_function(grid.dim, terms,
                                         self.get(params, pkey, "r", float, 1.0, lambda v: v > 0, "must be positive"))
            with np.errstate(invalid="ignore"):
                values = grid.evaluate_xyz(func)
            if not np.all(np.isfinite(values)):
                self.fail(pkey, "data are not finite on the grid (negative base with fractional power?)")
        if not np.all(values > 0):
            self.fail(f"{name}.kind", f"{name} must be strictly positive on the grid (min {values.min():.6g})")
        return ScalarField(grid, values), func


def parse_config_text(text: str, source: str = "<config>", base: Optional[Path] = None,
                      env: Optional[dict] = None) -> RunSpec:
    data, marks = load_yaml(text, source)
    v = _Validator(data, marks, source, base or Path.cwd())
    v.mapping(data, "", _TOP_KEYS)

    dim = v.get(data, "", "dim", int, check=lambda d: d in (1, 2), why="must be 1 (curves) or 2 (surfaces)")
    n_lon = v.get(data, "", "n_lon", int, 64)
    n_lat = v.get(data, "", "n_lat", int, 32 if dim == 2 else None) if dim == 2 else data.get("n_lat")
    lat_scheme = v.get(data, "", "lat_scheme", str, "legendre", lambda s: s in LAT_SCHEMES,
                       f"is not one of {', '.join(LAT_SCHEMES)}")
    lon_filter = v.get(data, "", "lon_filter", str, "polar", lambda s: s in LON_FILTERS,
                       f"is not one of {', '.join(LON_FILTERS)}")
    try:
        grid = build_grid(dim, n_lat, n_lon, lat_scheme)
    except ValueError as exc:
        v.fail("n_lat" if "n_lat" in str(exc) else "n_lon", str(exc))
    k = v.get(data, "", "k", int, 1, lambda x: 1 <= x <= dim, f"violates 1 <= k <= n-1 = {dim}")

    phi = v.mapping(data.get("phi", {"kind": "power"}), "phi", _PHI_KEYS)
    kind = v.get(phi, "phi", "kind", str, "power", lambda s: s == "power",
                 "is not supported from config files (only 'power'; custom models via the Python API)")
    p = v.get(phi, "phi", "p", float, 2.0)
    a = v.get(phi, "phi", "a", float, p - 1.0)
    extras = {name: v.get(phi, "phi", name, float, default, lambda x: x > 0, "must be positive")
              for name, default in (("alpha", 1e-3), ("epsilon", 0.1), ("s0", 1.0))}
    model = OrliczModel.power(p, a, **extras)

    f, f_func = v.data_field("f", _F_KINDS, grid)
    h0, _ = v.data_field("h0", _H0_KINDS, grid)

    pos = lambda x: x > 0  # noqa: E731
    kw = dict(
        dt0=v.get(data, "", "dt0", float, 1e-3, pos, "must be positive"),
        dt_min=v.get(data, "", "dt_min", float, 1e-12, pos, "must be positive"),
        dt_max=v.get(data, "", "dt_max", float, 1e-2, pos, "must be positive"),
        step_cap_delta=v.get(data, "", "step_cap_delta", float, 1e-3, pos, "must be positive"),
        tol_stationary=v.get(data, "", "tol_stationary", float, 1e-9, pos, "must be positive"),
        t_max=v.get(data, "", "t_max", float, 100.0, pos, "must be positive"),
        step_max=v.get(data, "", "step_max", int, 1_000_000, pos, "must be positive"),
    )
    if not kw["dt_min"] <= kw["dt0"] <= kw["dt_max"]:
        v.fail("dt0", "need dt_min <= dt0 <= dt_max")
    residual_bound = v.get(data, "", "residual_bound", float, 10.0 * kw["tol_stationary"], pos, "must be positive")

    out = v.mapping(data.get("output", {}), "output", _OUTPUT_KEYS)
    out_dir = v.get(out, "output", "dir", str, "runs/latest")
    every = v.get(out, "output", "every", int, 0, lambda x: x >= 0, "must be >= 0 (0 writes only first/last)")
    env = os.environ if env is None else env
    if env.get(OUTPUT_DIR_ENV):
        out_dir = env[OUTPUT_DIR_ENV]
    out_path = Path(out_dir)

    try:
        flow = FlowConfig(k=k, model=model, f=f, lon_filter=lon_filter, **kw)
    except ValueError as exc:
        v.fail("", str(exc))
    return RunSpec(flow, h0, out_path, every, residual_bound, data, f_func)


def parse_config(path, env: Optional[dict] = None) -> RunSpec:
    """Read and validate a YAML config file; relative paths resolve against its directory."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", source=str(path)) from None
    return parse_config_text(text, str(path), path.parent, env)


def echo_yaml(data: Any) -> str:
    return yaml.safe_dump(data, sort_keys=False)
