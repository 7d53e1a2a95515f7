"""Uniform periodic staggered grid and the discrete vector calculus on it.

Node fields are plain ``(nx, ny)`` float arrays indexed ``[i, j]``.  Edge
fields carry two such arrays: ``x[i, j]`` lives at ``(i + 1/2, j)`` and
``y[i, j]`` at ``(i, j + 1/2)``.  Every stencil wraps periodically.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "GridSpec",
    "EdgeField",
    "wrap",
    "node_divergence",
    "node_gradient",
    "cell_circulation",
]


@dataclass(frozen=True)
class GridSpec:
    """Periodic rectangle ``[x0, x0 + lx) x [y0, y0 + ly)`` with ``nx * ny`` nodes.

    Node ``(i, j)`` sits at ``(x0 + i*dx, y0 + j*dy)`` for zero-based ``i, j``.
    """

    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0
    x0: float = 0.0
    y0: float = 0.0

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny:
            raise ValueError("node counts must be integers")
        if self.nx < 2 or self.ny < 2:
            raise ValueError(f"need at least 2 nodes per direction, got {self.nx}x{self.ny}")
        if not (self.lx > 0 and self.ly > 0):
            raise ValueError("domain lengths must be positive")

    @classmethod
    def square(cls, h: float, lower: float = -1.0, upper: float = 1.0) -> "GridSpec":
        """Square periodic box with spacing ``h``; ``h`` must divide the side."""
        length = upper - lower
        n = int(round(length / h))
        if n < 2 or abs(n * h - length) > 1e-9 * length:
            raise ValueError(f"h={h} does not divide the side length {length}")
        return cls(n, n, length, length, lower, lower)

    @property
    def dx(self) -> float:
        return self.lx / self.nx

    @property
    def dy(self) -> float:
        return self.ly / self.ny

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    def x_nodes(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.nx)

    def y_nodes(self) -> np.ndarray:
        return self.y0 + self.dy * np.arange(self.ny)

    def node_coords(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x_nodes(), self.y_nodes(), indexing="ij")

    def xedge_coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates of the ``(i + 1/2, j)`` points."""
        return np.meshgrid(self.x_nodes() + 0.5 * self.dx, self.y_nodes(), indexing="ij")

    def yedge_coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates of the ``(i, j + 1/2)`` points."""
        return np.meshgrid(self.x_nodes(), self.y_nodes() + 0.5 * self.dy, indexing="ij")

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)


@dataclass
class EdgeField:
    """Staggered vector field; ``x`` on vertical-cut edges, ``y`` on horizontal ones."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.shape != self.y.shape or self.x.ndim != 2:
            raise ValueError(f"component shapes differ: {self.x.shape} vs {self.y.shape}")

    @classmethod
    def zeros(cls, grid: GridSpec) -> "EdgeField":
        return cls(np.zeros(grid.shape), np.zeros(grid.shape))

    @classmethod
    def full(cls, grid: GridSpec, value: float) -> "EdgeField":
        return cls(np.full(grid.shape, float(value)), np.full(grid.shape, float(value)))

    @classmethod
    def from_function(cls, grid: GridSpec, fx, fy) -> "EdgeField":
        """Sample ``fx(x, y)`` and ``fy(x, y)`` at the matching half points."""
        return cls(fx(*grid.xedge_coords()), fy(*grid.yedge_coords()))

    def copy(self) -> "EdgeField":
        return EdgeField(self.x.copy(), self.y.copy())

    def __add__(self, other: "EdgeField") -> "EdgeField":
        return EdgeField(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "EdgeField") -> "EdgeField":
        return EdgeField(self.x - other.x, self.y - other.y)

    def __mul__(self, scale: float) -> "EdgeField":
        return EdgeField(self.x * scale, self.y * scale)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "EdgeField":
        if isinstance(other, EdgeField):
            return EdgeField(self.x / other.x, self.y / other.y)
        return EdgeField(self.x / other, self.y / other)

    def __neg__(self) -> "EdgeField":
        return EdgeField(-self.x, -self.y)

    def max_abs(self) -> float:
        return float(max(np.abs(self.x).max(), np.abs(self.y).max()))

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.x).all() and np.isfinite(self.y).all())


def wrap(i: int, n: int) -> int:
    """Reduce a one-based index into ``1..n`` periodically."""
    return (i - 1) % n + 1


def node_divergence(field: EdgeField, grid: GridSpec) -> np.ndarray:
    return ((field.x - np.roll(field.x, 1, axis=0)) / grid.dx
            + (field.y - np.roll(field.y, 1, axis=1)) / grid.dy)


def node_gradient(phi: np.ndarray, grid: GridSpec) -> EdgeField:
    """Forward differences of a node field, landing on the edges."""
    return EdgeField((np.roll(phi, -1, axis=0) - phi) / grid.dx,
                     (np.roll(phi, -1, axis=1) - phi) / grid.dy)


def cell_circulation(field: EdgeField, grid: GridSpec) -> np.ndarray:
    """Counter-clockwise line integral around each cell.

    Entry ``[i, j]`` is the cell whose lower-left node is ``(i, j)``.  The
    sign makes the circulation of :func:`node_gradient` output vanish.
    """
    return ((field.x - np.roll(field.x, -1, axis=1)) * grid.dx
            + (np.roll(field.y, -1, axis=0) - field.y) * grid.dy)
