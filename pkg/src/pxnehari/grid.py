"""Tensor grids on boxes and nodal fields living on them."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid on ``[0, L_1] x ... x [0, L_N]`` with N in {1, 2}.

    Nodes are numbered in C order of the array shape ``resolution`` (the x
    index varies slowest), and all nodal fields are stored as flat vectors.
    """

    extents: tuple[float, ...]
    resolution: tuple[int, ...]

    def __post_init__(self):
        extents = tuple(float(e) for e in self.extents)
        resolution = tuple(int(n) for n in self.resolution)
        object.__setattr__(self, "extents", extents)
        object.__setattr__(self, "resolution", resolution)
        if len(extents) not in (1, 2) or len(extents) != len(resolution):
            raise ValueError("grid must be 1D or 2D with one extent per axis")
        if any(e <= 0 for e in extents):
            raise ValueError(f"extents must be positive, got {extents}")
        if any(n < 3 for n in resolution):
            raise ValueError(f"need at least 3 nodes per axis, got {resolution}")

    @property
    def dim(self) -> int:
        return len(self.resolution)

    @property
    def size(self) -> int:
        return int(np.prod(self.resolution))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / (n - 1) for L, n in zip(self.extents, self.resolution))

    @property
    def measure(self) -> float:
        return float(np.prod(self.extents))

    @cached_property
    def axes(self) -> list[np.ndarray]:
        return [np.linspace(0.0, L, n) for L, n in zip(self.extents, self.resolution)]

    @cached_property
    def coords(self) -> list[np.ndarray]:
        """Flat coordinate arrays, one per axis."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return [m.ravel() for m in mesh]

    @cached_property
    def points(self) -> np.ndarray:
        return np.column_stack(self.coords)

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        idx = np.indices(self.resolution)
        mask = np.zeros(self.resolution, dtype=bool)
        for axis, n in enumerate(self.resolution):
            mask |= (idx[axis] == 0) | (idx[axis] == n - 1)
        mask = mask.ravel()
        mask.setflags(write=False)
        return mask

    @cached_property
    def interior(self) -> np.ndarray:
        """Indices of the free (non-boundary) nodes."""
        return np.flatnonzero(~self.boundary_mask)

    def evaluate(self, fn) -> np.ndarray:
        """Evaluate ``fn(x)`` or ``fn(x, y)`` at every node."""
        vals = np.asarray(fn(*self.coords), dtype=float)
        return np.broadcast_to(vals, (self.size,)).copy()

    def as_array(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values).reshape(self.resolution)


@dataclass
class ScalarField:
    """Nodal values of a function on ``grid``.

    With ``dirichlet=True`` the boundary nodes must be exactly zero.
    """

    grid: Grid
    values: np.ndarray
    dirichlet: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        if self.values.shape != (self.grid.size,):
            raise ValueError(
                f"expected {self.grid.size} nodal values, got {self.values.size}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")
        if self.dirichlet and np.any(self.values[self.grid.boundary_mask] != 0.0):
            raise ValueError("dirichlet field has nonzero boundary values")

    @classmethod
    def from_function(cls, grid: Grid, fn, dirichlet: bool = True) -> "ScalarField":
        vals = grid.evaluate(fn)
        if dirichlet:
            vals[grid.boundary_mask] = 0.0
        return cls(grid, vals, dirichlet)

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls(grid, np.zeros(grid.size), True)

    def with_values(self, values) -> "ScalarField":
        return ScalarField(self.grid, values, self.dirichlet)

    def __neg__(self):
        return self.with_values(-self.values)

    def __mul__(self, c: float):
        return self.with_values(float(c) * self.values)

    __rmul__ = __mul__

    def __add__(self, other: "ScalarField"):
        return ScalarField(
            self.grid, self.values + other.values, self.dirichlet and other.dirichlet
        )

    def __sub__(self, other: "ScalarField"):
        return ScalarField(
            self.grid, self.values - other.values, self.dirichlet and other.dirichlet
        )


@dataclass
class VectorField:
    """Per-node vector values, shape ``(n_nodes, dim)``."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.size, self.grid.dim):
            raise ValueError("vector field must have one component per axis")

    def magnitude(self) -> np.ndarray:
        return np.sqrt(np.sum(self.values**2, axis=1))
