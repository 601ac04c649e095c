"""Dirichlet sine basis, grid quadrature, and the modal and volume-element projections on (0, 1)."""

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, List, Sequence, Tuple, Union

import numpy as np

from burgers_stab.defaults import MIN_GRID_POINTS


class ResolutionError(ValueError):
    """Raised when a mode index or partition is too fine for the grid."""

    def __init__(self, message: str, max_admissible: int):
        super().__init__(message)
        self.max_admissible = max_admissible


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid of ``points`` interior nodes on [0, 1] with homogeneous Dirichlet endpoints.

    :param points: number of interior nodes ``M``. Node ``j`` sits at ``j / (M + 1)``.
    """

    points: int

    def __post_init__(self):
        if int(self.points) != self.points or self.points < MIN_GRID_POINTS:
            raise ValueError(f"grid needs an integer number of points >= {MIN_GRID_POINTS}, found {self.points}")

    @property
    def spacing(self) -> float:
        return 1.0 / (self.points + 1)

    @property
    def nodes(self) -> np.ndarray:
        """Interior node coordinates."""
        return np.arange(1, self.points + 1) / (self.points + 1)

    @property
    def padded_nodes(self) -> np.ndarray:
        """Node coordinates including both boundary nodes."""
        return np.arange(0, self.points + 2) / (self.points + 1)

    @property
    def max_mode(self) -> int:
        """Largest sine mode index the grid resolves."""
        return self.points // 2

    @property
    def max_cells(self) -> int:
        """Finest volume partition with at least four grid cells per interval."""
        return self.points // 4


@dataclass(frozen=True, eq=False)
class GridField:
    """Function sampled at the interior nodes of a grid; boundary values are implicitly zero."""

    grid: GridSpec
    values: np.ndarray

    # numpy scalars defer to the reflected operators below
    __array_ufunc__ = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.points,):
            raise GridMismatchError(
                f"field on a grid of {self.grid.points} points needs {self.grid.points} values, found {values.shape}"
            )
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: GridSpec) -> "GridField":
        return cls(grid, np.zeros(grid.points))

    @classmethod
    def from_function(cls, grid: GridSpec, fn: Callable[[np.ndarray], np.ndarray]) -> "GridField":
        """Sample ``fn`` at the interior nodes."""
        return cls(grid, np.broadcast_to(fn(grid.nodes), (grid.points,)))

    def padded(self) -> np.ndarray:
        """Values with the two boundary zeros attached."""
        return np.concatenate(([0.0], self.values, [0.0]))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def _other_values(self, other: "GridField") -> np.ndarray:
        _check_same_grid(self, other)
        return other.values

    def __add__(self, other: "GridField") -> "GridField":
        return GridField(self.grid, self.values + self._other_values(other))

    def __sub__(self, other: "GridField") -> "GridField":
        return GridField(self.grid, self.values - self._other_values(other))

    def __mul__(self, scalar: float) -> "GridField":
        return GridField(self.grid, self.values * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "GridField":
        return GridField(self.grid, -self.values)


@dataclass(frozen=True, eq=False)
class EigenPair:
    index: int
    eigenvalue: float
    eigenfunction: GridField


@dataclass(frozen=True)
class VolumePartition:
    """Partition of [0, 1] into ``count`` equal half-open intervals ``J_k = [(k-1)/N, k/N)``."""

    count: int

    def __post_init__(self):
        if int(self.count) != self.count or self.count < 1:
            raise ValueError(f"partition count must be a positive integer, found {self.count}")

    @property
    def width(self) -> float:
        return 1.0 / self.count

    @property
    def intervals(self) -> List[Tuple[float, float]]:
        return [((k - 1) / self.count, k / self.count) for k in range(1, self.count + 1)]

    def cell_index(self, grid: GridSpec) -> np.ndarray:
        """Zero-based interval index of every interior node; a node on an edge belongs to the interval it opens."""
        return (np.arange(1, grid.points + 1) * self.count) // (grid.points + 1)


def _check_same_grid(a: GridField, b: GridField):
    if a.grid != b.grid:
        raise GridMismatchError(f"fields live on different grids: {a.grid} and {b.grid}")


def _check_mode_count(count: int, grid: GridSpec):
    if count > grid.max_mode:
        raise ResolutionError(
            f"{count} modes are not resolvable on a grid of {grid.points} points; "
            f"the maximum admissible mode is {grid.max_mode}",
            max_admissible=grid.max_mode,
        )


def dirichlet_eigenvalue(k: int) -> float:
    """Eigenvalue ``(k pi)^2`` of ``-d^2/dx^2`` on (0, 1) with Dirichlet conditions."""
    return float((k * np.pi) ** 2)


@lru_cache(maxsize=64)
def sine_matrix(grid: GridSpec, count: int) -> np.ndarray:
    """Rows are the normalized eigenfunctions ``sqrt(2) sin(k pi x)``, k = 1..count, sampled on the grid."""
    modes = np.arange(1, count + 1).reshape(-1, 1)
    matrix = np.sqrt(2.0) * np.sin(np.pi * modes * grid.nodes.reshape(1, -1))
    matrix.flags.writeable = False
    return matrix


def eigenpair(k: int, grid: GridSpec) -> EigenPair:
    if k < 1:
        raise ValueError(f"mode index must be >= 1, found {k}")
    _check_mode_count(k, grid)
    return EigenPair(k, dirichlet_eigenvalue(k), GridField(grid, sine_matrix(grid, k)[k - 1]))


def l2_inner(a: GridField, b: GridField) -> float:
    """Trapezoidal approximation of the L2(0, 1) inner product; the boundary nodes contribute nothing."""
    _check_same_grid(a, b)
    return float(a.grid.spacing * np.dot(a.values, b.values))


def l2_norm(a: GridField) -> float:
    return float(np.sqrt(l2_inner(a, a)))


def lp_norm(a: GridField, p: float) -> float:
    return float((a.grid.spacing * np.sum(np.abs(a.values) ** p)) ** (1.0 / p))


def sup_norm(a: GridField) -> float:
    return float(np.max(np.abs(a.values)))


def gradient(a: GridField) -> np.ndarray:
    """First derivative at every node including the boundaries.

    Centered differences inside, one-sided differences at the two boundary nodes.
    """
    padded = a.padded()
    h = a.grid.spacing
    derivative = np.empty_like(padded)
    derivative[1:-1] = (padded[2:] - padded[:-2]) / (2.0 * h)
    derivative[0] = (padded[1] - padded[0]) / h
    derivative[-1] = (padded[-1] - padded[-2]) / h
    return derivative


def h1_seminorm(a: GridField) -> float:
    derivative = gradient(a)
    squared = derivative**2
    integral = a.grid.spacing * (np.sum(squared[1:-1]) + 0.5 * (squared[0] + squared[-1]))
    return float(np.sqrt(integral))


def modal_coeffs(a: GridField, count: int) -> np.ndarray:
    """Coefficients ``(a, w_k)`` for k = 1..count."""
    _check_mode_count(count, a.grid)
    if count == 0:
        return np.zeros(0)
    return a.grid.spacing * (sine_matrix(a.grid, count) @ a.values)


def modal_reconstruct(coeffs: Union[Sequence[float], np.ndarray], grid: GridSpec) -> GridField:
    """Sample ``sum_k coeffs[k-1] w_k`` on the grid."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.size == 0:
        return GridField.zeros(grid)
    _check_mode_count(coeffs.size, grid)
    return GridField(grid, coeffs @ sine_matrix(grid, coeffs.size))


def volume_averages(a: GridField, partition: VolumePartition) -> np.ndarray:
    """Mean of ``a`` over every interval of the partition.

    Each interval averages the nodes that ``cell_index`` assigns to it, the same nodes ``piecewise_reconstruct``
    fills, so ``(piecewise_reconstruct(volume_averages(z)), z) = h sum_k n_k zbar_k^2`` holds exactly.
    """
    grid = a.grid
    count = partition.count
    if count > grid.max_cells:
        raise ResolutionError(
            f"a partition into {count} intervals needs at least 4 grid cells per interval; "
            f"the maximum admissible count on {grid.points} points is {grid.max_cells}",
            max_admissible=grid.max_cells,
        )
    index = partition.cell_index(grid)
    sums = np.bincount(index, weights=a.values, minlength=count)
    return sums / np.bincount(index, minlength=count)


def piecewise_reconstruct(
    averages: Union[Sequence[float], np.ndarray], partition: VolumePartition, grid: GridSpec
) -> GridField:
    """Sample the step function ``sum_k averages[k-1] chi_{J_k}`` on the grid."""
    averages = np.asarray(averages, dtype=float)
    if averages.shape != (partition.count,):
        raise ValueError(f"expected {partition.count} interval averages, found {averages.shape}")
    return GridField(grid, averages[partition.cell_index(grid)])
