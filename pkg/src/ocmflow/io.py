"""Text serialization: field dumps, the diagnostics series, meshes and manifests."""
from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Optional

import numpy as np

from .diagnostics import CSV_FIELDS, DiagnosticsRecord
from .geometry import body_geometry
from .sphere import ScalarField, SphericalGrid, build_grid


def _fmt(x: float) -> str:
    return "%.17g" % float(x)


def write_field(path, field: ScalarField, meta: Optional[dict] = None) -> Path:
    """Write '#'-prefixed metadata, then one ``angles... value`` row per node."""
    grid = field.grid
    path = Path(path)
    lines = [
        f"# dim={grid.dim}",
        f"# n_lat={grid.n_lat}",
        f"# n_lon={grid.n_lon}",
        f"# lat_scheme={grid.lat_scheme}",
    ]
    for key, value in (meta or {}).items():
        lines.append(f"# {key}={value}")
    angles = [a.ravel() for a in grid.angles]
    for row in zip(*angles, field.values.ravel()):
        lines.append(" ".join(_fmt(x) for x in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_field(path, grid: Optional[SphericalGrid] = None) -> tuple[ScalarField, dict]:
    """Load a field dump; checks node angles against the grid described by its header."""
    meta, rows = {}, []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            meta[key.strip()] = value.strip()
            continue
        try:
            rows.append([float(x) for x in line.split()])
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: malformed row: {exc}") from None
    try:
        dim, n_lat, n_lon = int(meta["dim"]), int(meta["n_lat"]), int(meta["n_lon"])
    except KeyError as exc:
        raise ValueError(f"{path}: missing header key {exc}") from None
    file_grid = build_grid(dim, n_lat if dim == 2 else None, n_lon, meta.get("lat_scheme", "legendre"))
    if grid is None:
        grid = file_grid
    elif grid.shape != file_grid.shape or grid.dim != dim:
        raise ValueError(f"{path}: field on {file_grid.shape} does not match grid {grid.shape}")
    data = np.array(rows)
    if data.shape != (grid.size, dim + 1):
        raise ValueError(f"{path}: expected {grid.size} rows of {dim + 1} columns, got {data.shape}")
    for i, a in enumerate(grid.angles):
        if np.max(np.abs(data[:, i] - a.ravel())) > 1e-13:
            raise ValueError(f"{path}: node angles do not match the grid")
    return ScalarField(grid, data[:, -1].reshape(grid.shape)), meta


class SeriesWriter:
    """Observer appending one CSV row per accepted state."""

    def __init__(self, path):
        self.path = Path(path)
        self._fh = self.path.open("w", newline="")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(CSV_FIELDS)
        self.rows = 0

    def __call__(self, record: DiagnosticsRecord, state) -> None:
        self._writer.writerow([_fmt(x) for x in record.row()])
        self.rows += 1

    def close(self) -> None:
        self._fh.close()


def read_series(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        cols = list(zip(*[[float(x) for x in row] for row in reader])) or [[] for _ in header]
    return {name: np.array(col) for name, col in zip(header, cols)}


def write_mesh(path, h: ScalarField) -> Path:
    """Wavefront OBJ of X = grad h + h x; quads between neighbouring rings on S^2."""
    grid = h.grid
    X = body_geometry(h).X
    lines = [f"# support-function embedding, dim={grid.dim}"]
    for p in X.reshape(-1, grid.n):
        lines.append("v " + " ".join(_fmt(c) for c in p) + (" 0.0" if grid.n == 2 else ""))
    if grid.dim == 1:
        n = grid.n_lon
        for i in range(n):
            lines.append(f"l {i + 1} {(i + 1) % n + 1}")
    else:
        nl, nm = grid.n_lat, grid.n_lon
        idx = lambda i, j: i * nm + (j % nm) + 1  # noqa: E731
        for i in range(nl - 1):
            for j in range(nm):
                lines.append(f"f {idx(i, j)} {idx(i + 1, j)} {idx(i + 1, j + 1)} {idx(i, j + 1)}")
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)


def read_mesh_vertices(path) -> np.ndarray:
    verts = [list(map(float, line.split()[1:])) for line in Path(path).read_text().splitlines()
             if line.startswith("v ")]
    return np.array(verts)


def digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(path, manifest: dict) -> Path:
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    return Path(path)
