"""Problem instances and the discrete operators acting on node arrays."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from . import expr as ex
from .coefficients import (
    ExponentField,
    Regularization,
    RhsSpec,
    coeff_aniso,
    coeff_iso,
    coordinate_binding,
    flux_aniso,
)
from .grid import Domain, Grid, ScalarField, node_gradient, power_abs

KINDS = ("anisotropic", "isotropic")


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Regularized Dirichlet problem on a box.

    The boundary data is the trace of ``u0`` on the grid boundary, so the
    compatibility of initial and boundary values holds by construction.
    """

    grid: Grid
    kind: str
    exponents: ExponentField
    rhs: RhsSpec
    reg: Regularization
    u0: ScalarField
    T: float
    sigma: float = 0.9
    snapshots: int = 32
    u0_expr: ex.Expr | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.exponents.isotropic != (self.kind == "isotropic"):
            raise ValueError("exponent field does not match the problem kind")
        if self.u0.grid != self.grid:
            raise ValueError("u0 lives on a different grid")
        if not self.T > 0:
            raise ValueError("T must be positive")
        if not 0 < self.sigma <= 1:
            raise ValueError("sigma must lie in (0, 1]")
        if self.snapshots < 1:
            raise ValueError("need at least one snapshot interval")

    @property
    def isotropic(self) -> bool:
        return self.kind == "isotropic"

    @property
    def n(self) -> int:
        return self.grid.n

    @cached_property
    def binding(self) -> dict[str, np.ndarray]:
        return coordinate_binding(self.grid)

    @cached_property
    def boundary(self) -> np.ndarray:
        return self.grid.boundary_mask()

    @property
    def psi(self) -> np.ndarray:
        """Boundary values (the trace of ``u0``) on boundary nodes."""
        return self.u0.values[self.boundary]

    def with_eps(self, eps: float, eps0: float | None = None) -> "ProblemSpec":
        reg = Regularization(eps, eps0 if eps0 is not None else max(eps, self.reg.eps0), self.reg.eps_min)
        return _replace(self, reg=reg)

    def with_rhs(self, rhs: RhsSpec) -> "ProblemSpec":
        return _replace(self, rhs=rhs)


def _replace(spec, **changes):
    from dataclasses import replace

    return replace(spec, **changes)


def _parse(e):
    return ex.parse(e) if isinstance(e, str) else e


def make_problem(
    domain: Domain | Grid,
    counts: Sequence[int] | int | None = None,
    *,
    kind: str = "anisotropic",
    p: str | Sequence[str] = "0",
    u0: str,
    T: float,
    eps: float = 1e-4,
    eps0: float | None = None,
    eps_min: float = 1e-8,
    rhs: RhsSpec | None = None,
    sigma: float = 0.9,
    snapshots: int = 32,
) -> ProblemSpec:
    """Convenience constructor from expression strings.

    For the anisotropic kind a single ``p`` is used on every axis.
    """
    grid = domain if isinstance(domain, Grid) else Grid(domain, tuple(np.atleast_1d(counts)))
    ps = [p] if isinstance(p, (str, ex.Num, ex.Var)) or not isinstance(p, Sequence) else list(p)
    ps = [_parse(e) for e in ps]
    if kind == "anisotropic" and len(ps) == 1:
        ps = ps * grid.n
    exponents = ExponentField.sample(ps, grid, isotropic=(kind == "isotropic"))
    u0_expr = _parse(u0)
    u0_field = ScalarField(grid, ex.evaluate_on(u0_expr, coordinate_binding(grid), grid.shape))
    return ProblemSpec(
        grid=grid,
        kind=kind,
        exponents=exponents,
        rhs=rhs if rhs is not None else RhsSpec(),
        reg=Regularization(eps, eps0, eps_min),
        u0=u0_field,
        T=T,
        sigma=sigma,
        snapshots=snapshots,
        u0_expr=u0_expr,
    )


def _axis_slices(n, axis, lo, hi):
    idx = [slice(None)] * n
    idx[axis] = slice(lo, hi)
    return tuple(idx)


def _face_average(a, axis):
    n = a.ndim
    return 0.5 * (a[_axis_slices(n, axis, None, -1)] + a[_axis_slices(n, axis, 1, None)])


def face_gradients(u: np.ndarray, spec: ProblemSpec, axis: int) -> list[np.ndarray]:
    """Gradient vector on the faces normal to ``axis``.

    The normal component is the one-cell difference; tangential components
    are node gradients averaged across the face.
    """
    h = spec.grid.h
    out = []
    node_grads = None
    for j in range(spec.n):
        if j == axis:
            out.append(np.diff(u, axis=axis) / h[axis])
        else:
            if node_grads is None:
                node_grads = node_gradient(u, h)
            out.append(_face_average(node_grads[j], axis))
    return out


def face_fluxes(u: np.ndarray, spec: ProblemSpec, eps: float | None = None) -> list[np.ndarray]:
    """Normal flux on the faces of every axis (face exponent = mean of the nodes)."""
    eps = spec.reg.eps if eps is None else eps
    eps_min = spec.reg.eps_min
    fluxes = []
    for i in range(spec.n):
        if spec.isotropic:
            p_face = _face_average(spec.exponents.values[0], i)
            g = face_gradients(u, spec, i)
            s = sum(gj * gj for gj in g)
            fluxes.append(flux_from_square(eps, p_face, s, g[i], eps_min))
        else:
            p_face = _face_average(spec.exponents.values[i], i)
            z = np.diff(u, axis=i) / spec.grid.h[i]
            fluxes.append(flux_aniso(eps, p_face, z, eps_min))
    return fluxes


def flux_from_square(eps, p, sq, zi, eps_min):
    """``(sq + eps)**(p/2) * zi`` written to match :func:`flux_aniso` bit for bit
    when ``sq = zi * zi``."""
    if eps < eps_min:
        flux_aniso(eps, p, zi, eps_min)  # raises
    return (sq + eps) ** (0.5 * np.asarray(p)) * zi


def divergence(u: np.ndarray, spec: ProblemSpec, eps: float | None = None) -> np.ndarray:
    """Conservative divergence of the regularized flux; zero on boundary nodes."""
    out = np.zeros_like(u, dtype=float)
    n = spec.n
    h = spec.grid.h
    for i, f in enumerate(face_fluxes(u, spec, eps)):
        out[_axis_slices(n, i, 1, -1)] += np.diff(f, axis=i) / h[i]
    out[spec.boundary] = 0.0
    return out


def node_fluxes(u: np.ndarray, spec: ProblemSpec, eps: float | None = None) -> list[np.ndarray]:
    """Regularized flux vector at nodes from node gradients."""
    eps = spec.reg.eps if eps is None else eps
    grads = node_gradient(u, spec.grid.h)
    if spec.isotropic:
        s = sum(g * g for g in grads)
        p = spec.exponents.values[0]
        return [flux_from_square(eps, p, s, g, spec.reg.eps_min) for g in grads]
    return [flux_aniso(eps, p, g, spec.reg.eps_min) for p, g in zip(spec.exponents.values, grads)]


def nondivergence(u: np.ndarray, spec: ProblemSpec, eps: float | None = None) -> np.ndarray:
    """The same operator expanded as ``sum a_ij u_{x_i x_j} + sum b_i``.

    Used as an independent evaluation path for the divergence form.
    """
    eps = spec.reg.eps if eps is None else eps
    h = spec.grid.h
    grads = node_gradient(u, h)
    second = [node_gradient(g, h) for g in grads]
    out = np.zeros_like(u, dtype=float)
    if spec.isotropic:
        z = np.stack(grads, axis=-1)
        gradp = np.stack(spec.exponents.dp, axis=-1)
        A, b = coeff_iso(eps, spec.exponents.values[0], gradp, z, spec.reg.eps_min)
        for i in range(spec.n):
            out += b[..., i]
            for j in range(spec.n):
                out += A[..., i, j] * second[i][j]
        return out
    for i in range(spec.n):
        a, b = coeff_aniso(eps, spec.exponents.values[i], spec.exponents.dp[i], grads[i], spec.reg.eps_min)
        out += a * second[i][i] + b
    return out


def rhs_values(u: np.ndarray, spec: ProblemSpec) -> np.ndarray:
    grads = node_gradient(u, spec.grid.h)
    return spec.rhs.evaluate(spec.binding, u, grads, spec.isotropic)


def energy(u: np.ndarray, spec: ProblemSpec) -> float:
    """Gradient energy: sum over axes of the integral of |u_{x_i}|^(p_i+2)/(p_i+2),
    or the integral of |grad u|^(p+2)/(p+2) in the isotropic case."""
    grads = node_gradient(u, spec.grid.h)
    if spec.isotropic:
        p = spec.exponents.values[0]
        mag = np.sqrt(sum(g * g for g in grads))
        return spec.grid.integrate(power_abs(mag, p + 2.0) / (p + 2.0))
    total = 0.0
    for p, g in zip(spec.exponents.values, grads):
        total += spec.grid.integrate(power_abs(g, p + 2.0) / (p + 2.0))
    return total
