"""Named initial-condition generators."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..grid import Grid
from .config import InitialSpec


def _as_point(value, grid: Grid) -> np.ndarray:
    point = np.atleast_1d(np.asarray(value, dtype=float))
    if point.size == 1:
        point = np.repeat(point, grid.dim)
    if point.size != grid.dim:
        raise ValueError(f"center needs {grid.dim} coordinates, got {point.size}")
    return point


def gaussian(grid: Grid, center, width: float, amplitude: float, background: float = 0.0) -> np.ndarray:
    """``background + amplitude * exp(-|x - center|^2 / (2 width^2))``."""
    if width <= 0:
        raise ValueError("width must be positive")
    if amplitude < 0 or background < 0:
        raise ValueError("amplitude and background must be nonnegative")
    c = _as_point(center, grid)
    r2 = sum((x - ci) ** 2 for x, ci in zip(grid.centers(), c))
    return background + amplitude * np.exp(-r2 / (2.0 * width**2))


def bumps(grid: Grid, count: int, seed: int, width: float, amplitude: float,
          background: float = 0.0) -> np.ndarray:
    """Sum of ``count`` Gaussian bumps at seeded uniform centers and amplitudes in [0.5, 1] * amplitude."""
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = np.random.default_rng(seed)
    out = np.full(grid.shape, float(background))
    for _ in range(int(count)):
        center = rng.uniform(0.0, 1.0, grid.dim) * np.asarray(grid.lengths)
        scale = rng.uniform(0.5, 1.0)
        out = out + gaussian(grid, center, width, amplitude * scale)
    return out


def random_field(grid: Grid, seed: int, low: float, high: float) -> np.ndarray:
    if not 0 <= low < high:
        raise ValueError("random fields need 0 <= low < high")
    return np.random.default_rng(seed).uniform(low, high, grid.shape)


def from_file(grid: Grid, path: str | Path) -> np.ndarray:
    """Load a field from ``.npy`` or comma-separated text (rows along axis 0)."""
    path = Path(path)
    arr = np.load(path) if path.suffix == ".npy" else np.loadtxt(path, delimiter=",", ndmin=1)
    return grid.field(arr)


def build_initial(grid: Grid, spec: InitialSpec) -> np.ndarray:
    opts = dict(spec.options)
    if spec.kind == "homogeneous":
        values = grid.constant(opts.get("value", 1.0))
    elif spec.kind == "gaussian":
        center = opts.get("center", tuple(0.5 * L for L in grid.lengths))
        values = gaussian(grid, center, opts.get("width", 0.1), opts.get("amplitude", 1.0),
                          opts.get("background", 0.0))
    elif spec.kind == "bumps":
        values = bumps(grid, int(opts.get("count", 3)), int(opts["seed"]), opts.get("width", 0.08),
                       opts.get("amplitude", 1.0), opts.get("background", 0.0))
    elif spec.kind == "random":
        values = random_field(grid, int(opts["seed"]), opts.get("low", 0.1), opts.get("high", 1.0))
    elif spec.kind == "file":
        values = from_file(grid, opts["path"])
    else:
        raise ValueError(f"unknown initial-condition kind {spec.kind!r}")
    values = grid.field(values)
    if np.any(values < 0):
        raise ValueError("initial densities must be nonnegative")
    return values
