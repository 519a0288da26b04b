"""Cell-centered rectangular meshes with homogeneous Neumann boundaries.

Fields are plain ``numpy`` arrays shaped like ``grid.shape`` (axis 0 is x,
axis 1 is y).  Face fields are tuples with one array per axis; the array for
axis ``k`` has ``cells[k] + 1`` entries along that axis, and its first and
last entries are the boundary faces, which always carry zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

FaceField = tuple  # tuple[np.ndarray, ...], one component per axis


@dataclass(frozen=True)
class Grid:
    dim: int
    lengths: tuple[float, ...]
    cells: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if len(self.lengths) != self.dim or len(self.cells) != self.dim:
            raise ValueError("lengths and cells need one entry per axis")
        for length in self.lengths:
            if not np.isfinite(length) or length <= 0:
                raise ValueError(f"lengths must be positive, got {self.lengths}")
        for n in self.cells:
            if int(n) != n or n < 3:
                raise ValueError(f"each axis needs at least 3 cells, got {self.cells}")

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(int(n) for n in self.cells)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(length / n for length, n in zip(self.lengths, self.cells))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        """|Omega|."""
        return float(np.prod(self.lengths))

    def centers(self) -> tuple[np.ndarray, ...]:
        """Cell-center coordinates as broadcastable arrays (``meshgrid`` with ``ij`` indexing)."""
        axes = [(np.arange(n) + 0.5) * h for n, h in zip(self.shape, self.spacing)]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def field(self, values) -> np.ndarray:
        """Validate and return ``values`` as a float field on this grid."""
        arr = np.asarray(values, dtype=float)
        if arr.shape != self.shape:
            if arr.size == self.size:
                arr = arr.reshape(self.shape)
            else:
                raise ValueError(f"field has shape {arr.shape}, grid expects {self.shape}")
        check_finite(arr)
        return arr

    def constant(self, value: float) -> np.ndarray:
        return np.full(self.shape, float(value))


def build_grid(dim: int, lengths: Sequence[float], cells: Sequence[int]) -> Grid:
    return Grid(int(dim), tuple(float(x) for x in lengths), tuple(int(n) for n in cells))


def check_finite(arr: np.ndarray, name: str = "field") -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"{name} contains non-finite values")
    return arr


def integrate(grid: Grid, field: np.ndarray) -> float:
    """Midpoint quadrature over Omega."""
    return float(np.sum(field) * grid.cell_volume)


def laplacian_neumann(grid: Grid, field: np.ndarray) -> np.ndarray:
    """3-point / 5-point Laplacian with mirrored ghost cells."""
    out = np.zeros(grid.shape)
    for axis, h in enumerate(grid.spacing):
        padded = np.concatenate(
            [np.take(field, [0], axis=axis), field, np.take(field, [-1], axis=axis)], axis=axis
        )
        n = grid.shape[axis]
        left = np.take(padded, range(0, n), axis=axis)
        right = np.take(padded, range(2, n + 2), axis=axis)
        out += (left - 2.0 * field + right) / h**2
    return check_finite(out)


def gradient_faces(grid: Grid, field: np.ndarray) -> FaceField:
    components = []
    for axis, h in enumerate(grid.spacing):
        g = np.diff(field, axis=axis) / h
        pad = [(0, 0)] * grid.dim
        pad[axis] = (1, 1)
        components.append(np.pad(g, pad))
    return tuple(components)


def divergence_faces(grid: Grid, flux: FaceField) -> np.ndarray:
    """Per-cell (outgoing minus incoming) face flux over spacing."""
    if len(flux) != grid.dim:
        raise ValueError("flux needs one component per axis")
    out = np.zeros(grid.shape)
    for axis, (comp, h) in enumerate(zip(flux, grid.spacing)):
        n = grid.shape[axis]
        if comp.shape[axis] != n + 1:
            raise ValueError(f"flux component {axis} has wrong shape {comp.shape}")
        first = np.take(comp, 0, axis=axis)
        last = np.take(comp, n, axis=axis)
        if np.any(first != 0.0) or np.any(last != 0.0):
            raise ValueError("boundary faces must carry zero flux")
        out += np.diff(comp, axis=axis) / h
    return check_finite(out)


def default_strides(grid: Grid) -> list[int]:
    longest = max(grid.shape)
    strides, s = [], 1
    while s < longest:
        strides.append(s)
        s *= 2
    if strides[-1] != longest - 1:
        strides.append(longest - 1)
    return strides


def holder_seminorm(
    grid: Grid, field: np.ndarray, theta: float, strides: Iterable[int] | None = None
) -> float:
    """Lower estimate of the C^theta seminorm from axis-aligned cell pairs.

    Pairs are separated by ``stride`` cells along one axis; strides larger
    than an axis are skipped for that axis.
    """
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    strides = default_strides(grid) if strides is None else sorted(set(int(s) for s in strides))
    if not strides or min(strides) < 1:
        raise ValueError("strides must be a nonempty set of positive offsets")
    best = 0.0
    for axis, h in enumerate(grid.spacing):
        n = grid.shape[axis]
        for s in strides:
            if s >= n:
                continue
            a = np.take(field, range(s, n), axis=axis)
            b = np.take(field, range(0, n - s), axis=axis)
            best = max(best, float(np.max(np.abs(a - b))) / (s * h) ** theta)
    return best
