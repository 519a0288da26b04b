"""Neumann Helmholtz solves for the chemical signal and related lower bounds."""

from __future__ import annotations

import functools
from dataclasses import asdict, dataclass, field, fields

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import Grid, check_finite, integrate

DIRECT_SOLVE_LIMIT = 250_000
DELTA0_CELL_LIMIT = 20_000


class SolverError(RuntimeError):
    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class ModelParams:
    """The eleven system constants.

    ``relaxed=True`` admits zeros (never negatives); it exists for control
    experiments such as pure diffusion or logistic-only runs.
    """

    chi1: float
    chi2: float
    a1: float
    a2: float
    b1: float
    b2: float
    c1: float
    c2: float
    mu: float
    nu: float
    lam: float
    relaxed: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        for f in fields(self):
            if f.name == "relaxed":
                continue
            value = getattr(self, f.name)
            if not np.isfinite(value):
                raise ValueError(f"{f.name} must be finite")
            if self.relaxed:
                if value < 0:
                    raise ValueError(f"{f.name} must be nonnegative, got {value}")
            elif value <= 0:
                raise ValueError(
                    f"{f.name} = {value} violates the standing assumption that all "
                    "system constants are positive constants"
                )
        if self.mu <= 0:
            raise ValueError("mu must be positive even in relaxed mode")

    @classmethod
    def names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls) if f.name != "relaxed")

    def as_dict(self) -> dict[str, float]:
        d = asdict(self)
        d.pop("relaxed")
        return d

    @property
    def a_min(self) -> float:
        return min(self.a1, self.a2)

    @property
    def a_max(self) -> float:
        return max(self.a1, self.a2)

    @property
    def b_min(self) -> float:
        return min(self.b1, self.b2)

    @property
    def b_max(self) -> float:
        return max(self.b1, self.b2)

    @property
    def c_min(self) -> float:
        return min(self.c1, self.c2)

    @property
    def c_max(self) -> float:
        return max(self.c1, self.c2)


def laplacian_matrix(grid: Grid) -> sp.csr_matrix:
    """Sparse Neumann Laplacian acting on C-order flattened fields."""
    blocks = []
    for n, h in zip(grid.shape, grid.spacing):
        main = np.full(n, -2.0)
        main[0] = main[-1] = -1.0
        off = np.ones(n - 1)
        blocks.append(sp.diags([off, main, off], [-1, 0, 1], format="csr") / h**2)
    if grid.dim == 1:
        return blocks[0].tocsr()
    nx, ny = grid.shape
    return (sp.kron(blocks[0], sp.identity(ny)) + sp.kron(sp.identity(nx), blocks[1])).tocsr()


def certify_m_matrix(matrix: sp.spmatrix, margin: float) -> None:
    """Raise unless the matrix is a strictly diagonally dominant M-matrix."""
    m = sp.csr_matrix(matrix)
    diag = m.diagonal()
    off = m - sp.diags(diag)
    if np.any(diag <= 0):
        raise SolverError("operator diagonal is not positive")
    if off.nnz and off.data.max() > 0:
        raise SolverError("operator has positive off-diagonal entries")
    row_excess = diag - np.asarray(abs(off).sum(axis=1)).ravel()
    if np.any(row_excess < margin * (1 - 1e-12)):
        raise SolverError("operator is not strictly diagonally dominant")


class HelmholtzSolver:
    """Factorized (or CG-preconditioned) ``-Delta_h + shift*I`` on one grid."""

    def __init__(self, grid: Grid, shift: float, tol: float = 1e-12, direct: bool | None = None):
        if shift <= 0:
            raise ValueError("shift must be positive")
        self.grid = grid
        self.shift = float(shift)
        self.tol = float(tol)
        self.matrix = (-laplacian_matrix(grid) + self.shift * sp.identity(grid.size)).tocsc()
        certify_m_matrix(self.matrix, self.shift)
        self.direct = grid.size <= DIRECT_SOLVE_LIMIT if direct is None else direct
        if self.direct:
            self._lu = spla.splu(self.matrix)
        else:
            self._jacobi = sp.diags(1.0 / self.matrix.diagonal())

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        b = np.asarray(rhs, dtype=float).reshape(self.grid.size)
        if self.direct:
            x = self._lu.solve(b)
        else:
            x, info = spla.cg(
                self.matrix, b, rtol=self.tol, atol=0.0, M=self._jacobi, maxiter=10 * self.grid.size
            )
            if info != 0:
                res = float(np.max(np.abs(self.matrix @ x - b)))
                raise SolverError(f"CG did not converge (info={info})", residual=res)
        return check_finite(x.reshape(self.grid.shape), "solution")

    def solve_many(self, rhs: np.ndarray) -> np.ndarray:
        """Solve for every column of a (size, k) right-hand side block."""
        if self.direct:
            return self._lu.solve(np.asarray(rhs, dtype=float))
        return np.column_stack([self.solve(col).ravel() for col in np.asarray(rhs).T])

    def apply(self, field_: np.ndarray) -> np.ndarray:
        return (self.matrix @ np.asarray(field_).ravel()).reshape(self.grid.shape)


@functools.lru_cache(maxsize=64)
def helmholtz_solver(grid: Grid, shift: float, tol: float = 1e-12) -> HelmholtzSolver:
    return HelmholtzSolver(grid, shift, tol)


def source_term(u: np.ndarray, v: np.ndarray, params: ModelParams) -> np.ndarray:
    return params.nu * u + params.lam * v


def solve_w(grid: Grid, u: np.ndarray, v: np.ndarray, params: ModelParams,
            return_info: bool = False):
    """Solve ``-Delta_h w + mu w = nu u + lam v`` with zero-flux boundaries.

    With ``return_info`` a dict with ``residual`` and ``degenerate`` (source
    identically zero, so ``w`` is identically zero) is returned alongside.
    """
    if np.any(u < 0) or np.any(v < 0):
        raise ValueError("u and v must be nonnegative")
    solver = helmholtz_solver(grid, params.mu)
    src = source_term(u, v, params)
    degenerate = not np.any(src > 0)
    w = np.zeros(grid.shape) if degenerate else solver.solve(src)
    if not return_info:
        return w
    res = float(np.max(np.abs(solver.apply(w) - src)))
    return w, {"residual": res, "degenerate": degenerate}


def residual(grid: Grid, w: np.ndarray, u: np.ndarray, v: np.ndarray, params: ModelParams) -> float:
    solver = helmholtz_solver(grid, params.mu)
    return float(np.max(np.abs(solver.apply(w) - source_term(u, v, params))))


@functools.lru_cache(maxsize=32)
def _min_green(grid: Grid, mu: float, block: int = 512) -> float:
    solver = helmholtz_solver(grid, mu)
    n = grid.size
    lowest = np.inf
    for start in range(0, n, block):
        stop = min(n, start + block)
        rhs = np.zeros((n, stop - start))
        rhs[np.arange(start, stop), np.arange(stop - start)] = 1.0 / grid.cell_volume
        lowest = min(lowest, float(np.min(solver.solve_many(rhs))))
    return lowest


def discrete_delta0(grid: Grid, params: ModelParams) -> float:
    """Certified constant with ``min w >= delta0 * integral(u + v)`` on this grid.

    Column j of the discrete Green matrix solves the Helmholtz problem with a
    unit-mass source in cell j; the smallest entry, scaled by min(nu, lam),
    bounds every admissible solve from below.
    """
    if grid.size > DELTA0_CELL_LIMIT:
        raise ValueError(
            f"discrete_delta0 needs one solve per cell; {grid.size} cells exceeds "
            f"the limit of {DELTA0_CELL_LIMIT}"
        )
    return min(params.nu, params.lam) * _min_green(grid, float(params.mu))


def _harmonic(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return 2.0 * a * b / (a + b)


def face_means(grid: Grid, w: np.ndarray) -> tuple[np.ndarray, ...]:
    """Harmonic means of ``w`` on interior faces, one array per axis."""
    out = []
    for axis in range(grid.dim):
        n = grid.shape[axis]
        out.append(_harmonic(np.take(w, range(0, n - 1), axis=axis),
                             np.take(w, range(1, n), axis=axis)))
    return tuple(out)


def dirichlet_quotient(grid: Grid, w: np.ndarray) -> float:
    """Quadrature of |grad w|^2 / w^2 with harmonic-mean face values."""
    if np.any(w <= 0):
        raise ValueError("dirichlet_quotient requires w > 0 everywhere")
    total = 0.0
    for axis, (h, wf) in enumerate(zip(grid.spacing, face_means(grid, w))):
        g = np.diff(w, axis=axis) / h
        total += float(np.sum((g / wf) ** 2))
    return total * grid.cell_volume


def delta0_margin(grid: Grid, w: np.ndarray, u: np.ndarray, v: np.ndarray, delta0: float) -> float:
    """``min w - delta0 * integral(u + v)``; nonnegative when the bound holds."""
    return float(np.min(w)) - delta0 * integrate(grid, u + v)
