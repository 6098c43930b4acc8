"""Residuals of the integral identity against lateral-vanishing test functions.

For a trajectory ``u`` and a test function ``phi`` vanishing on the lateral
boundary the residual is

    R = int_0^T int_Omega (u_t phi + flux(grad u) . grad phi - F phi) dx dt

with the regularized flux at the trajectory's own ``eps``. ``u_t`` comes from
snapshot differences (centered inside, one-sided at the ends); both integrals
use the trapezoid rule.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientSnapshots
from .grid import Grid
from .problem import ProblemSpec, node_fluxes, rhs_values

MIN_SNAPSHOTS = 8
PROFILE_NAMES = ("1", "t/T", "(t/T)^2")

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


@dataclass(frozen=True)
class TestFunction:
    """``phi(t, x) = scale * (t/T)^profile * prod_i sin(k_i pi (x_i - lo_i) / L_i)``."""

    __test__ = False  # not a pytest class

    modes: tuple[int, ...]
    profile: int
    T: float
    scale: float = 1.0

    def time_factor(self, t: float) -> float:
        return self.scale * (t / self.T) ** self.profile

    def _factors(self, grid: Grid):
        sins, coss, rates = [], [], []
        for i, k in enumerate(self.modes):
            L = grid.domain.extents[i]
            xi = np.arange(grid.counts[i] + 1) / grid.counts[i]
            arg = k * np.pi * xi
            s = np.sin(arg)
            s[0] = s[-1] = 0.0
            sins.append(s)
            coss.append(np.cos(arg))
            rates.append(k * np.pi / L)
        return sins, coss, rates

    def spatial(self, grid: Grid) -> np.ndarray:
        sins, _, _ = self._factors(grid)
        return _outer(sins)

    def spatial_gradient(self, grid: Grid) -> list[np.ndarray]:
        sins, coss, rates = self._factors(grid)
        out = []
        for i in range(grid.n):
            parts = list(sins)
            parts[i] = rates[i] * coss[i]
            out.append(_outer(parts))
        return out

    def values(self, t: float, grid: Grid) -> np.ndarray:
        return self.time_factor(t) * self.spatial(grid)

    def gradient(self, t: float, grid: Grid) -> list[np.ndarray]:
        q = self.time_factor(t)
        return [q * g for g in self.spatial_gradient(grid)]

    @property
    def label(self) -> str:
        return ",".join(str(k) for k in self.modes)


def _outer(vectors):
    out = vectors[0]
    for v in vectors[1:]:
        out = np.multiply.outer(out, v)
    return np.asarray(out, dtype=float)


def _modes(n):
    """Multi-indices ordered by total degree, then lexicographically."""
    for total in itertools.count(n):
        for k in itertools.product(range(1, total - n + 2), repeat=n):
            if sum(k) == total:
                yield k


def make_test_functions(count: int, spec: ProblemSpec) -> list[TestFunction]:
    if count < 1:
        raise ValueError("count must be at least 1")
    out = []
    for k in _modes(spec.n):
        for m in range(len(PROFILE_NAMES)):
            out.append(TestFunction(k, m, spec.T))
            if len(out) == count:
                return out
    return out


def _integrand(u, ut, t, phi, spec, eps):
    grid = spec.grid
    val = phi.values(t, grid)
    grad = phi.gradient(t, grid)
    flux = node_fluxes(u, spec, eps)
    dens = (ut - rhs_values(u, spec)) * val
    for f, g in zip(flux, grad):
        dens = dens + f * g
    return grid.integrate(dens)


def instant_residual(u, ut, t, phi, spec: ProblemSpec, eps: float | None = None) -> float:
    """Spatial residual at one time level (used as a per-step monitor)."""
    return _integrand(u, ut, t, phi, spec, spec.reg.eps if eps is None else eps)


def weak_residual(traj, phi, spec: ProblemSpec) -> float:
    if len(traj) < MIN_SNAPSHOTS:
        raise InsufficientSnapshots(
            f"need at least {MIN_SNAPSHOTS} snapshots for time quadrature, got {len(traj)}"
        )
    stack = traj.stack
    ut = np.gradient(stack, traj.times, axis=0, edge_order=1)
    vals = [
        _integrand(stack[k], ut[k], float(t), phi, spec, traj.eps) for k, t in enumerate(traj.times)
    ]
    return float(_trapezoid(vals, traj.times))


def residual_table(traj, spec: ProblemSpec, count: int = 6) -> list[tuple[str, str, float]]:
    return [
        (phi.label, PROFILE_NAMES[phi.profile], weak_residual(traj, phi, spec))
        for phi in make_test_functions(count, spec)
    ]


def write_residual_table(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("mode", "time_profile", "R"))
        for mode, prof, r in rows:
            w.writerow((mode, prof, repr(float(r))))
