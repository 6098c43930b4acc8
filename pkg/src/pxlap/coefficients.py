"""Regularized fluxes, their non-divergence coefficients, and problem data.

The anisotropic flux along one axis is ``(z**2 + eps)**(p/2) * z``; expanding
its divergence gives the coefficient ``a`` (slope of the flux in ``z``) and the
drift ``b`` coming from the spatial variation of the exponent. The isotropic
flux is ``(|z|**2 + eps)**(p/2) * z`` with coefficient matrix ``A``.

All kernels accept numpy arrays and broadcast.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import expr as ex
from .errors import (
    ExponentRangeViolation,
    GrowthViolation,
    HypothesisViolation,
    MonotonicityViolation,
    QuadratureBudget,
    RegularizationFloor,
)
from .grid import Grid, node_gradient

EPS_MIN = 1e-8


@dataclass(frozen=True)
class Regularization:
    eps: float
    eps0: float | None = None
    eps_min: float = EPS_MIN

    def __post_init__(self):
        if self.eps0 is None:
            object.__setattr__(self, "eps0", self.eps)
        if not self.eps_min > 0:
            raise RegularizationFloor(f"eps_min must be positive, got {self.eps_min}")
        if self.eps < self.eps_min:
            raise RegularizationFloor(f"eps={self.eps} is below the floor eps_min={self.eps_min}")
        if self.eps > self.eps0:
            raise ValueError(f"eps={self.eps} exceeds eps0={self.eps0}")

    def sup_samples(self) -> tuple[float, ...]:
        """Values standing in for the interval [0, eps0], the floor replacing 0."""
        raw = (self.eps_min, self.eps0 / 4, self.eps0 / 2, self.eps0)
        return tuple(sorted({max(self.eps_min, e) for e in raw}))


def _check_eps(eps, eps_min):
    if np.any(np.asarray(eps) < eps_min):
        raise RegularizationFloor(f"eps={eps} is below the floor eps_min={eps_min}")


def flux_aniso(eps, p, z, eps_min=EPS_MIN):
    """``(z**2 + eps)**(p/2) * z``: odd and strictly increasing in ``z``."""
    _check_eps(eps, eps_min)
    z = np.asarray(z, dtype=float)
    return (z * z + eps) ** (0.5 * np.asarray(p)) * z


def coeff_aniso(eps, p, dp, z, eps_min=EPS_MIN):
    """Non-divergence coefficients ``(a, b)`` of one anisotropic flux term.

    ``a`` is the derivative of :func:`flux_aniso` in ``z``;
    ``b = dp * z * (z**2 + eps)**(p/2) * ln(z**2 + eps) / 2`` collects the
    part of the flux derivative due to ``dp = d p_i / d x_i``.
    """
    _check_eps(eps, eps_min)
    z = np.asarray(z, dtype=float)
    p = np.asarray(p, dtype=float)
    s = z * z + eps
    a = s ** ((p - 2.0) / 2.0) * ((1.0 + p) * z * z + eps)
    b = dp * z * s ** (p / 2.0) * 0.5 * np.log(s)
    return a, b


def flux_iso(eps, p, z, eps_min=EPS_MIN):
    """``(|z|**2 + eps)**(p/2) * z`` with the vector index on the last axis."""
    _check_eps(eps, eps_min)
    z = np.asarray(z, dtype=float)
    s = np.sum(z * z, axis=-1) + eps
    return (s ** (0.5 * np.asarray(p)))[..., None] * z


def coeff_iso(eps, p, gradp, z, eps_min=EPS_MIN):
    """Coefficient matrix ``A`` and drift ``b`` of the isotropic operator.

    ``z`` and ``gradp`` carry the vector index on their last axis; ``A`` has
    shape ``z.shape + (n,)``.
    """
    _check_eps(eps, eps_min)
    z = np.asarray(z, dtype=float)
    gradp = np.asarray(gradp, dtype=float)
    p = np.asarray(p, dtype=float)
    n = z.shape[-1]
    s = np.sum(z * z, axis=-1) + eps
    scale = s ** ((p - 2.0) / 2.0)
    zz = z[..., :, None] * z[..., None, :]
    A = (scale * p)[..., None, None] * zz
    diag = scale[..., None] * (s[..., None] + p[..., None] * z * z)
    idx = np.arange(n)
    A[..., idx, idx] = diag
    b = gradp * z * (s ** (p / 2.0) * 0.5 * np.log(s))[..., None]
    return A, b


def coordinate_binding(grid: Grid) -> dict[str, np.ndarray]:
    return {f"x{i + 1}": c for i, c in enumerate(grid.coordinates())}


@dataclass(frozen=True, eq=False)
class ExponentField:
    """Sampled exponents: one per axis (anisotropic) or a single one (isotropic).

    ``dp`` holds, for the anisotropic case, ``d p_i / d x_i`` per axis and, for
    the isotropic case, the full gradient of ``p``.
    """

    exprs: tuple[ex.Expr, ...]
    values: tuple[np.ndarray, ...]
    dp: tuple[np.ndarray, ...]
    isotropic: bool

    @classmethod
    def sample(cls, exprs: Sequence[ex.Expr], grid: Grid, isotropic: bool) -> "ExponentField":
        exprs = tuple(exprs)
        expected = 1 if isotropic else grid.n
        if len(exprs) != expected:
            raise ValueError(f"need {expected} exponent expression(s), got {len(exprs)}")
        binding = coordinate_binding(grid)
        values = tuple(ex.evaluate_on(e, binding, grid.shape) for e in exprs)
        for i, v in enumerate(values):
            if not np.all(np.isfinite(v)):
                raise ExponentRangeViolation(f"exponent {i + 1} is not finite on the grid")
            k = np.unravel_index(np.argmin(v), v.shape)
            if v[k] <= -1.0:
                x = tuple(float(c[k]) for c in grid.coordinates())
                raise ExponentRangeViolation(
                    f"exponent {i + 1} must satisfy min p > -1 on the closed domain; "
                    f"found {float(v[k])!r} at x={x}"
                )
        if isotropic:
            dp = tuple(node_gradient(values[0], grid.h))
        else:
            dp = tuple(node_gradient(v, grid.h)[i] for i, v in enumerate(values))
        for v in values + dp:
            v.setflags(write=False)
        return cls(exprs, values, dp, isotropic)

    def per_axis(self, n: int) -> tuple[np.ndarray, ...]:
        return self.values * n if self.isotropic else self.values

    @property
    def p_max(self) -> float:
        return float(max(v.max() for v in self.values))

    @property
    def p_min(self) -> tuple[float, ...]:
        return tuple(float(v.min()) for v in self.values)


@dataclass(frozen=True, eq=False)
class MollifiedF0:
    """Steklov-averaged ``f0`` tabulated on grid nodes times a uniform u-grid."""

    u_values: np.ndarray
    table: np.ndarray  # grid.shape + (len(u_values),)
    eps: float

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        uv = self.u_values
        du = uv[1] - uv[0]
        pos = np.clip((u - uv[0]) / du, 0.0, len(uv) - 1.0)
        k = np.minimum(np.floor(pos).astype(int), len(uv) - 2)
        frac = pos - k
        lo = np.take_along_axis(self.table, k[..., None], axis=-1)[..., 0]
        hi = np.take_along_axis(self.table, k[..., None] + 1, axis=-1)[..., 0]
        return lo + frac * (hi - lo)


def _bump(r):
    out = np.zeros_like(r)
    inside = r < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return out


def _mollify_node(f0, x, grid, eps, u_values, q):
    g, w = np.polynomial.legendre.leggauss(q)
    zeta = u_values[:, None] + eps * g[None, :]
    zw = 0.5 * w
    depends_on_x = any(v.startswith("x") for v in ex.variables(f0))
    if not depends_on_x:
        binding = {f"x{i + 1}": float(x[i]) for i in range(grid.n)}
        binding["u"] = zeta
        vals = ex.evaluate_on(f0, binding, zeta.shape)
        return vals @ zw
    axes, weights = [], []
    for i in range(grid.n):
        a = max(grid.domain.lower[i], x[i] - eps)
        b = min(grid.domain.upper[i], x[i] + eps)
        axes.append(0.5 * (a + b) + 0.5 * (b - a) * g)
        weights.append(0.5 * (b - a) * w)
    ys = np.meshgrid(*axes, indexing="ij")
    wy = np.ones_like(ys[0])
    r2 = np.zeros_like(ys[0])
    for i in range(grid.n):
        shape = [1] * grid.n
        shape[i] = -1
        wy = wy * weights[i].reshape(shape)
        r2 = r2 + (ys[i] - x[i]) ** 2
    kernel = wy * _bump(np.sqrt(r2) / eps)
    kernel = (kernel / kernel.sum()).ravel()
    binding = {f"x{i + 1}": ys[i].ravel()[:, None, None] for i in range(grid.n)}
    binding["u"] = zeta[None, :, :]
    shape = (kernel.size,) + zeta.shape
    vals = ex.evaluate_on(f0, binding, shape)
    return np.einsum("y,yuq,q->u", kernel, vals, zw)


def mollify_f0(
    f0: ex.Expr,
    eps: float,
    grid: Grid,
    M: float,
    u_points: int = 101,
    quad_points: int = 8,
    tol: float = 1e-6,
) -> MollifiedF0:
    """Tabulate the Steklov average of ``f0`` in ``u`` combined with a bump
    kernel of radius ``eps`` in ``x`` (kernel renormalized on the box).

    The table covers ``u`` in ``[-M, M]``. A spot check with doubled
    quadrature on a few nodes raises :class:`QuadratureBudget` when the two
    estimates differ by more than ``tol`` (relative to the table scale).
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    u_values = np.linspace(-M, M, u_points) if M > 0 else np.linspace(-1.0, 1.0, u_points)
    coords = [c.ravel() for c in grid.coordinates()]
    nodes = np.stack(coords, axis=-1)
    table = np.empty((len(nodes), u_points))
    for k, x in enumerate(nodes):
        table[k] = _mollify_node(f0, x, grid, eps, u_values, quad_points)
    scale = max(1.0, float(np.max(np.abs(table))))
    for k in np.unique(np.linspace(0, len(nodes) - 1, min(9, len(nodes))).astype(int)):
        finer = _mollify_node(f0, nodes[k], grid, eps, u_values, 2 * quad_points)
        if np.max(np.abs(finer - table[k])) > tol * scale:
            raise QuadratureBudget(
                f"mollified f0 not resolved to {tol} with {quad_points} quadrature points "
                f"(node {k}, discrepancy {np.max(np.abs(finer - table[k])):.3e})"
            )
    table = table.reshape(grid.shape + (u_points,))
    table.setflags(write=False)
    return MollifiedF0(u_values, table, eps)


@dataclass(frozen=True, eq=False)
class RhsSpec:
    """Lower-order term ``F = (gradient part) + f0(x, u)``.

    ``kind="linear"``: gradient part is ``sum_i f_i(x) * u_{x_i}``.
    ``kind="growth"``: anisotropic ``sum_i f_i(x, u, z=u_{x_i})``; isotropic
    a single ``f(x, u, z=|grad u|)``.

    ``a1, a2`` bound ``u * F(x, u, 0) <= a1 u^2 + a2``; ``alpha, beta, ptilde``
    bound each gradient term by ``alpha |z|^(ptilde + 2) + beta``.
    """

    kind: str = "linear"
    terms: tuple[ex.Expr, ...] = ()
    f0: ex.Expr | None = None
    a1: float = 0.0
    a2: float = 0.0
    alpha: float = 0.0
    beta: float = 0.0
    ptilde: float | tuple[float, ...] | None = None
    f0_table: MollifiedF0 | None = field(default=None)

    def __post_init__(self):
        if self.kind not in ("linear", "growth"):
            raise ValueError(f"unknown rhs kind {self.kind!r}")
        for name in ("a1", "a2", "alpha", "beta"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    @property
    def is_zero(self) -> bool:
        return not self.terms and self.f0 is None

    def ptilde_for(self, p_min: Sequence[float]) -> tuple[float, ...]:
        """Per-exponent ptilde; defaults to the midpoint of (-1, min p)."""
        if self.ptilde is None:
            return tuple(0.5 * (-1.0 + m) for m in p_min)
        pt = np.atleast_1d(np.asarray(self.ptilde, dtype=float))
        if pt.size == 1:
            return (float(pt[0]),) * len(p_min)
        if pt.size != len(p_min):
            raise ValueError(f"need {len(p_min)} ptilde values, got {pt.size}")
        return tuple(float(v) for v in pt)

    def f0_values(self, binding, u):
        if self.f0_table is not None:
            return self.f0_table(u)
        if self.f0 is None:
            return np.zeros(np.shape(u))
        return ex.evaluate_on(self.f0, dict(binding, u=u), np.shape(u))

    def gradient_part(self, binding, u, grads, isotropic):
        shape = np.shape(u)
        out = np.zeros(shape)
        if not self.terms:
            return out
        if self.kind == "linear":
            for f, g in zip(self.terms, grads):
                out = out + ex.evaluate_on(f, binding, shape) * g
            return out
        if isotropic:
            z = np.sqrt(sum(g * g for g in grads))
            return ex.evaluate_on(self.terms[0], dict(binding, u=u, z=z), shape)
        for f, g in zip(self.terms, grads):
            out = out + ex.evaluate_on(f, dict(binding, u=u, z=g), shape)
        return out

    def evaluate(self, binding, u, grads, isotropic):
        """``F(x, u, grad u)`` at nodes; ``binding`` maps x1..xn to coordinates."""
        return self.gradient_part(binding, u, grads, isotropic) + self.f0_values(binding, u)

    def lipschitz_u(self, binding, u, grads, isotropic) -> float:
        """Sampled bound on ``|dF/du|`` around the state ``u``."""
        if self.f0 is None and (self.kind == "linear" or not self.terms):
            return 0.0
        d = 1e-6 * (1.0 + np.abs(u))
        up = self.evaluate(binding, u + d, grads, isotropic)
        dn = self.evaluate(binding, u - d, grads, isotropic)
        return float(np.max(np.abs(up - dn) / (2 * d)))


def check_hypotheses(
    rhs: RhsSpec,
    grid: Grid,
    exponents: ExponentField,
    M: float,
    u0_grads: Sequence[np.ndarray],
    u_samples: int = 101,
    z_samples: int = 21,
) -> None:
    """Sampled checks of the structural assumptions on ``F``.

    * ``F(x, u, z)`` nonincreasing in ``u`` on ``[-M, M]``
    * ``u F(x, u, 0) <= a1 u^2 + a2``
    * gradient terms bounded by ``alpha |z|^(ptilde+2) + beta``, with
      ``-1 < ptilde < min p``

    Raises a :class:`HypothesisViolation` subclass naming the failed condition.
    """
    binding = coordinate_binding(grid)
    isotropic = exponents.isotropic
    shape = grid.shape
    us = np.linspace(-M, M, u_samples) if M > 0 else np.zeros(1)
    zmax = max(1.0, 2.0 * max(float(np.max(np.abs(g))) for g in u0_grads))
    zs = np.linspace(-zmax, zmax, z_samples)

    ptilde = rhs.ptilde_for(exponents.p_min)
    for i, (pt, pm) in enumerate(zip(ptilde, exponents.p_min)):
        if not -1.0 < pt < pm:
            raise GrowthViolation(
                f"growth exponent ptilde_{i + 1}={pt} must satisfy -1 < ptilde < min p = {pm}"
            )

    def tol(vals):
        return 1e-12 * (1.0 + float(np.max(np.abs(vals))))

    # monotonicity in u, one term at a time
    def scan(fn, what):
        prev = fn(us[0])
        for k in range(1, len(us)):
            cur = fn(us[k])
            bad = cur - prev > tol(cur)
            if np.any(bad):
                j = np.unravel_index(np.argmax(cur - prev), bad.shape)
                raise MonotonicityViolation(
                    f"{what} increases in u between u={us[k - 1]:.6g} and u={us[k]:.6g} "
                    f"at node {tuple(int(v) for v in j)}"
                )
            prev = cur

    full = lambda u: np.full(shape, u)
    if rhs.f0 is not None or rhs.f0_table is not None:
        scan(lambda u: rhs.f0_values(binding, full(u)), "f0(x, u)")
    if rhs.kind == "growth" and rhs.terms:
        for z in zs[:: max(1, len(zs) // 5)]:
            zf = np.full(shape, z)
            if isotropic:
                scan(
                    lambda u: ex.evaluate_on(rhs.terms[0], dict(binding, u=full(u), z=abs(zf)), shape),
                    f"f(x, u, z={abs(z):.3g})",
                )
            else:
                for i, f in enumerate(rhs.terms):
                    scan(
                        lambda u: ex.evaluate_on(f, dict(binding, u=full(u), z=zf), shape),
                        f"f{i + 1}(x, u, z={z:.3g})",
                    )

    # sign condition behind the sup bound
    zero = [np.zeros(shape)] * grid.n
    for u in us:
        uf = u * rhs.evaluate(binding, full(u), zero, isotropic)
        excess = uf - (rhs.a1 * u * u + rhs.a2)
        if np.any(excess > tol(uf)):
            raise HypothesisViolation(
                f"u*F(x,u,0) <= a1*u^2 + a2 fails at u={u:.6g} "
                f"(excess {float(np.max(excess)):.3e})"
            )

    # growth bound on the gradient terms
    if not rhs.terms:
        return
    u_coarse = us[:: max(1, len(us) // 10)]
    if isotropic:
        svals = np.abs(zs[len(zs) // 2 :])
        for s in svals:
            bound = rhs.alpha * s ** (ptilde[0] + 2.0) + rhs.beta
            for u in u_coarse:
                if rhs.kind == "linear":
                    mag = np.sqrt(sum(ex.evaluate_on(f, binding, shape) ** 2 for f in rhs.terms))
                    val = mag * s
                else:
                    val = ex.evaluate_on(rhs.terms[0], dict(binding, u=full(u), z=np.full(shape, s)), shape)
                if np.any(val - bound > tol(val)):
                    raise GrowthViolation(
                        f"gradient term exceeds alpha*|z|^(ptilde+2)+beta at |z|={s:.4g}, u={u:.4g}"
                    )
        return
    for i, f in enumerate(rhs.terms):
        for z in zs:
            bound = rhs.alpha * abs(z) ** (ptilde[i] + 2.0) + rhs.beta
            for u in u_coarse:
                if rhs.kind == "linear":
                    val = ex.evaluate_on(f, binding, shape) * z
                else:
                    val = ex.evaluate_on(f, dict(binding, u=full(u), z=np.full(shape, z)), shape)
                if np.any(val - bound > tol(val)):
                    raise GrowthViolation(
                        f"f{i + 1} exceeds alpha*|z|^(ptilde+2)+beta at z={z:.4g}, u={u:.4g}"
                    )
