"""Uniform node grids on axis-aligned boxes.

Fields live on the closed box (boundary nodes included), so a grid with
``counts = (c1, ..., cn)`` cells carries ``(c1 + 1) * ... * (cn + 1)`` nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ExponentDomain, NonPositiveExtent, PxLapError, TooCoarse

MAX_DIM = 3


@dataclass(frozen=True)
class Domain:
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lower) != len(upper):
            raise ValueError("lower and upper must have the same length")
        if not 1 <= len(lower) <= MAX_DIM:
            raise ValueError(f"dimension must be between 1 and {MAX_DIM}, got {len(lower)}")
        for i, (a, b) in enumerate(zip(lower, upper)):
            if not b > a:
                raise NonPositiveExtent(f"axis {i}: upper {b} <= lower {a}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def n(self) -> int:
        return len(self.lower)

    @property
    def extents(self) -> tuple[float, ...]:
        return tuple(b - a for a, b in zip(self.lower, self.upper))

    @property
    def volume(self) -> float:
        return math.prod(self.extents)


@dataclass(frozen=True)
class Grid:
    domain: Domain
    counts: tuple[int, ...]
    h: tuple[float, ...] = field(init=False)

    def __post_init__(self):
        counts = tuple(int(c) for c in np.atleast_1d(self.counts))
        if len(counts) != self.domain.n:
            raise ValueError(f"need {self.domain.n} counts, got {len(counts)}")
        if any(c < 2 for c in counts):
            raise TooCoarse(f"every axis needs at least 2 cells, got {counts}")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(
            self, "h", tuple(e / c for e, c in zip(self.domain.extents, counts))
        )

    @property
    def n(self) -> int:
        return self.domain.n

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(c + 1 for c in self.counts)

    @property
    def node_count(self) -> int:
        return math.prod(self.shape)

    def axis(self, i: int) -> np.ndarray:
        """Node coordinates along axis ``i``: ``lower + k * h``."""
        return self.domain.lower[i] + np.arange(self.counts[i] + 1) * self.h[i]

    def coordinates(self) -> tuple[np.ndarray, ...]:
        """Node coordinate arrays, each of shape ``self.shape`` (ij indexing)."""
        return tuple(np.meshgrid(*(self.axis(i) for i in range(self.n)), indexing="ij"))

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for i in range(self.n):
            idx = [slice(None)] * self.n
            idx[i] = 0
            mask[tuple(idx)] = True
            idx[i] = -1
            mask[tuple(idx)] = True
        return mask

    def interior_mask(self) -> np.ndarray:
        return ~self.boundary_mask()

    def interior(self) -> tuple[slice, ...]:
        """Index tuple selecting the interior block of a node array."""
        return (slice(1, -1),) * self.n

    def trapezoid_weights(self) -> np.ndarray:
        """Tensor-product trapezoid weights; they sum to the domain volume."""
        w = np.ones(self.shape)
        for i in range(self.n):
            wi = np.full(self.counts[i] + 1, self.h[i])
            wi[0] = wi[-1] = 0.5 * self.h[i]
            shape = [1] * self.n
            shape[i] = -1
            w = w * wi.reshape(shape)
        return w

    def integrate(self, values: np.ndarray) -> float:
        return float(np.sum(self.trapezoid_weights() * values))


def build_grid(domain: Domain, counts: Sequence[int] | int) -> Grid:
    return Grid(domain, tuple(np.atleast_1d(counts)))


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Node samples of a function on the closed box of ``grid``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.size != self.grid.node_count:
            raise ValueError(
                f"field has {values.size} values, grid has {self.grid.node_count} nodes"
            )
        values = values.reshape(self.grid.shape)
        if not np.all(np.isfinite(values)):
            raise PxLapError("field values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


def node_gradient(values: np.ndarray, h: Sequence[float]) -> list[np.ndarray]:
    """Array-level kernel behind :func:`gradient_components`."""
    n = values.ndim
    if n == 1:
        return [np.gradient(values, h[0], edge_order=2)]
    return list(np.gradient(values, *h, edge_order=2))


def gradient_components(u: ScalarField) -> list[ScalarField]:
    """Partial derivatives along every axis.

    Central differences at interior nodes, second-order one-sided
    differences on the boundary, so affine fields are differentiated exactly.
    """
    return [ScalarField(u.grid, g) for g in node_gradient(u.values, u.grid.h)]


def power_abs(g: np.ndarray, s: np.ndarray) -> np.ndarray:
    """``|g|**s`` with ``0**s = 0`` for ``s > 0``; raises for ``g = 0, s <= 0``."""
    g = np.abs(np.asarray(g, dtype=float))
    s = np.broadcast_to(np.asarray(s, dtype=float), g.shape)
    zero = g == 0.0
    if np.any(zero & (s <= 0.0)):
        raise ExponentDomain("|g|**s evaluated at g = 0 with s <= 0")
    out = np.zeros_like(g)
    nz = ~zero
    out[nz] = g[nz] ** s[nz]
    return out


def integrate_power(g: ScalarField, s: ScalarField | float, weight=None) -> float:
    """Trapezoid approximation of the integral of ``weight * |g|**s``."""
    sv = s.values if isinstance(s, ScalarField) else s
    integrand = power_abs(g.values, sv)
    if weight is not None:
        integrand = integrand * (weight.values if isinstance(weight, ScalarField) else weight)
    return g.grid.integrate(integrand)


def write_snapshot(path: str | Path, t: float, u: ScalarField) -> None:
    grid = u.grid
    coords = grid.coordinates()
    cols = [c.ravel() for c in coords] + [u.values.ravel()]
    header = f"# t={t!r} n={grid.n} counts={','.join(str(c) for c in grid.counts)}\n"
    with open(path, "w") as fh:
        fh.write(header)
        for row in zip(*cols):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_snapshot(path: str | Path, grid: Grid | None = None) -> tuple[float, ScalarField]:
    """Load a snapshot; pass ``grid`` to reuse an existing grid instead of
    reconstructing one from the stored coordinates."""
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("#"):
            raise PxLapError(f"{path}: missing snapshot header")
        meta = dict(item.split("=", 1) for item in header[1:].split())
        t = float(meta["t"])
        n = int(meta["n"])
        counts = tuple(int(c) for c in meta["counts"].split(","))
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.shape[1] != n + 1:
        raise PxLapError(f"{path}: expected {n + 1} columns, got {data.shape[1]}")
    if grid is None:
        domain = Domain(tuple(data[:, :n].min(axis=0)), tuple(data[:, :n].max(axis=0)))
        grid = Grid(domain, counts)
    elif grid.counts != counts:
        raise PxLapError(f"{path}: counts {counts} do not match grid {grid.counts}")
    return t, ScalarField(grid, data[:, n])
