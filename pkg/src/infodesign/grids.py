"""Rectangular grids over the augmented state, lookup helpers and table export.

Grid axes are uniformly spaced.  Nodes are enumerated in C (row-major)
order over the axes: state dimensions first, then sensitivity entries
row-major.  Flattened tables indexed this way are what the solver
backends consume.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigError

__all__ = [
    "GridAxis",
    "GridSpec",
    "clamp_points",
    "nearest_node",
    "write_table_binary",
    "read_table_binary",
    "write_table_csv",
]

# Points within this many index units of a node snap onto it, so lookups at
# stored node coordinates reproduce stored values exactly.
NODE_SNAP = 1e-9


@dataclass(frozen=True)
class GridAxis:
    lo: float
    hi: float
    points: int

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)) or self.lo >= self.hi:
            raise ConfigError(f"axis bounds must satisfy lo < hi, got [{self.lo}, {self.hi}]")
        if self.points < 2:
            raise ConfigError(f"axis needs at least 2 points, got {self.points}")

    @property
    def step(self) -> float:
        return (self.hi - self.lo) / (self.points - 1)

    def values(self) -> np.ndarray:
        return self.lo + np.arange(self.points) * self.step


@dataclass(frozen=True)
class GridSpec:
    """Per-axis bounds and resolution of the augmented-state grid."""

    axes: tuple[GridAxis, ...]

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(self.axes))
        if not self.axes:
            raise ConfigError("grid needs at least one axis")

    @classmethod
    def from_bounds(cls, los, his, points) -> "GridSpec":
        points = np.broadcast_to(points, np.shape(los))
        return cls(tuple(GridAxis(float(l), float(h), int(k)) for l, h, k in zip(los, his, points)))

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(ax.points for ax in self.axes)

    @property
    def node_count(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64))

    @cached_property
    def los(self) -> np.ndarray:
        return np.array([ax.lo for ax in self.axes])

    @cached_property
    def his(self) -> np.ndarray:
        return np.array([ax.hi for ax in self.axes])

    @cached_property
    def inv_steps(self) -> np.ndarray:
        return 1.0 / np.array([ax.step for ax in self.axes])

    @cached_property
    def npts(self) -> np.ndarray:
        return np.array(self.shape, dtype=np.int64)

    @cached_property
    def strides(self) -> np.ndarray:
        """Flat index strides for C-order node enumeration."""
        shape = self.shape
        strides = np.empty(self.dim, dtype=np.int64)
        acc = 1
        for d in range(self.dim - 1, -1, -1):
            strides[d] = acc
            acc *= shape[d]
        return strides

    def axis_values(self, d: int) -> np.ndarray:
        return self.axes[d].values()

    def node_columns(self) -> list[np.ndarray]:
        """Per-dimension coordinate of every node, each a flat (node_count,) array."""
        shape = self.shape
        cols = []
        for d in range(self.dim):
            inner = int(np.prod(shape[d + 1 :], dtype=np.int64))
            outer = int(np.prod(shape[:d], dtype=np.int64))
            cols.append(np.tile(np.repeat(self.axis_values(d), inner), outer))
        return cols

    def node_states(self, n: int, p: int):
        """Node coordinates split into state ``(M, n)`` and sensitivity ``(M, n, p)``."""
        if self.dim != n + n * p:
            raise ConfigError(
                f"grid has {self.dim} axes but the augmented state needs {n + n * p}"
            )
        cols = self.node_columns()
        xs = np.stack(cols[:n], axis=1)
        sens = np.stack(cols[n:], axis=1).reshape(-1, n, p)
        return xs, sens


def clamp_points(points: np.ndarray, grid: GridSpec):
    """Clamp points onto the grid box; returns (clamped, count outside)."""
    points = np.asarray(points, dtype=np.float64)
    single = points.ndim == 1
    pts = np.atleast_2d(points)
    outside = (pts < grid.los) | (pts > grid.his)
    count = int(np.count_nonzero(np.any(outside, axis=1)))
    clamped = np.clip(pts, grid.los, grid.his)
    return (clamped[0] if single else clamped), count


def nearest_node(grid: GridSpec, point: np.ndarray):
    """Flat index of the node nearest to a point; flags points off the grid."""
    point = np.asarray(point, dtype=np.float64)
    outside = bool(np.any((point < grid.los) | (point > grid.his)))
    idx = np.rint((np.clip(point, grid.los, grid.his) - grid.los) * grid.inv_steps)
    idx = np.clip(idx.astype(np.int64), 0, grid.npts - 1)
    return int(np.sum(idx * grid.strides)), outside


_MAGIC = b"IDGRID01"


def write_table_binary(path, grid: GridSpec, values: np.ndarray) -> None:
    """Flat little-endian dump: header (dims, per-axis lo/hi/points), then values.

    Values are written row-major as 64-bit floats; integer tables (e.g.
    policies) are converted, which is exact below 2**53.
    """
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    if values.size != grid.node_count:
        raise ConfigError("table size does not match the grid")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<q", grid.dim))
        for ax in grid.axes:
            fh.write(struct.pack("<ddq", ax.lo, ax.hi, ax.points))
        fh.write(values.astype("<f8").tobytes())


def read_table_binary(path):
    """Inverse of :func:`write_table_binary`; returns (grid, values)."""
    with open(path, "rb") as fh:
        if fh.read(8) != _MAGIC:
            raise ConfigError(f"{path}: not a table file")
        (dim,) = struct.unpack("<q", fh.read(8))
        axes = []
        for _ in range(dim):
            lo, hi, points = struct.unpack("<ddq", fh.read(24))
            axes.append(GridAxis(lo, hi, int(points)))
        grid = GridSpec(tuple(axes))
        values = np.frombuffer(fh.read(8 * grid.node_count), dtype="<f8").astype(np.float64)
    return grid, values


def write_table_csv(path, grid: GridSpec, values: np.ndarray, value_name="value") -> None:
    """Node coordinates plus value per row; intended for small grids."""
    values = np.asarray(values).reshape(-1)
    if values.size != grid.node_count:
        raise ConfigError("table size does not match the grid")
    cols = grid.node_columns()
    with open(path, "w") as fh:
        fh.write(",".join([f"axis{d}" for d in range(grid.dim)] + [value_name]) + "\n")
        for i in range(values.size):
            coords = ",".join(f"{c[i]:.17g}" for c in cols)
            fh.write(f"{coords},{values[i]:.17g}\n")
