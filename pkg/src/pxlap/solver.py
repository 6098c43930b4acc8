"""Explicit conservative time stepping for the regularized problems."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .coefficients import check_hypotheses, coeff_aniso, coeff_iso
from .errors import CoefficientBlowup, NonFiniteState
from .grid import Grid, ScalarField, node_gradient, read_snapshot, write_snapshot
from .problem import ProblemSpec, _face_average, divergence, energy, face_gradients, rhs_values

log = logging.getLogger(__name__)

MONITOR_COLUMNS = (
    "t",
    "dt",
    "max_abs_u",
    "max_diff_quot",
    "y_t",
    "lipschitz_margin",
    "weak_residual_sample",
)


@dataclass(frozen=True)
class MonitorRow:
    t: float
    dt: float
    max_abs_u: float
    max_diff_quot: float
    y_t: float
    lipschitz_margin: float
    weak_residual_sample: float

    def as_tuple(self):
        return tuple(getattr(self, c) for c in MONITOR_COLUMNS)


@dataclass(frozen=True, eq=False)
class Trajectory:
    grid: Grid
    times: np.ndarray
    states: tuple[np.ndarray, ...]
    eps: float
    monitors: tuple[MonitorRow, ...] = field(default=())

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if len(times) != len(self.states):
            raise ValueError("one time per snapshot required")
        if len(times) > 1 and np.any(np.diff(times) <= 0):
            raise ValueError("snapshot times must be strictly increasing")
        object.__setattr__(self, "times", times)

    def __len__(self):
        return len(self.times)

    def snapshot(self, k: int) -> ScalarField:
        return ScalarField(self.grid, self.states[k])

    @property
    def stack(self) -> np.ndarray:
        return np.stack(self.states)

    def write(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        snap_dir = out / "snapshots"
        snap_dir.mkdir(parents=True, exist_ok=True)
        for k, (t, u) in enumerate(zip(self.times, self.states)):
            write_snapshot(snap_dir / f"snap_{k:04d}.csv", float(t), ScalarField(self.grid, u))
        write_monitors(out / "monitors.csv", self.monitors)

    @classmethod
    def read(cls, out_dir: str | Path, eps: float, grid: Grid | None = None) -> "Trajectory":
        files = sorted((Path(out_dir) / "snapshots").glob("snap_*.csv"))
        times, states = [], []
        for f in files:
            t, u = read_snapshot(f, grid)
            grid = u.grid
            times.append(t)
            states.append(np.array(u.values))
        if not files:
            raise FileNotFoundError(f"no snapshots under {out_dir}")
        return cls(grid, np.array(times), tuple(states), eps)


def write_monitors(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(MONITOR_COLUMNS)
        for r in rows:
            w.writerow([repr(float(v)) for v in r.as_tuple()])


def _max_coefficients(u, spec, eps):
    """Largest diagonal coefficient per axis (faces and nodes) and the largest
    off-diagonal row sum weighted by ``1 / (2 h_i h_j)``.

    The face maximum also includes the secant slope ``(|z|^2 + eps)^(p/2)`` of
    the flux, which exceeds the tangent coefficient when ``p < 0``; the
    conservative update is monotone only if the secant is covered too.
    """
    h = spec.grid.h
    n = spec.n
    eps_min = spec.reg.eps_min
    node_grads = node_gradient(u, h)
    diag = []
    off = 0.0
    if spec.isotropic:
        p = spec.exponents.values[0]
        zeros = np.zeros(u.shape + (n,))
        A_node, _ = coeff_iso(eps, p, zeros, np.stack(node_grads, axis=-1), eps_min)
        for i in range(n):
            g = face_gradients(u, spec, i)
            pf = _face_average(p, i)
            zf = np.stack(g, axis=-1)
            A_face, _ = coeff_iso(eps, pf, 0.0, zf, eps_min)
            secant = (np.sum(zf * zf, axis=-1) + eps) ** (0.5 * pf)
            diag.append(max(np.max(A_face[..., i, i]), np.max(secant), np.max(A_node[..., i, i])))
        if n > 1:
            row = np.zeros(u.shape)
            for i in range(n):
                for j in range(n):
                    if i != j:
                        row += np.abs(A_node[..., i, j]) / (2 * h[i] * h[j])
            off = float(np.max(row))
    else:
        for i in range(n):
            p = spec.exponents.values[i]
            z = np.diff(u, axis=i) / h[i]
            pf = _face_average(p, i)
            a_face, _ = coeff_aniso(eps, pf, 0.0, z, eps_min)
            secant = (z * z + eps) ** (0.5 * pf)
            a_node, _ = coeff_aniso(eps, p, 0.0, node_grads[i], eps_min)
            diag.append(max(np.max(a_face), np.max(secant), np.max(a_node)))
    return diag, off


def stable_dt(state, spec: ProblemSpec) -> float:
    """Explicit step limit ``sigma / (sum 2 a_i/h_i^2 + off-diagonal + L_F)``."""
    u = np.asarray(state, dtype=float)
    eps = spec.reg.eps
    diag, off = _max_coefficients(u, spec, eps)
    grads = node_gradient(u, spec.grid.h)
    lf = spec.rhs.lipschitz_u(spec.binding, u, grads, spec.isotropic)
    denom = sum(2.0 * a / hi**2 for a, hi in zip(diag, spec.grid.h)) + off + lf
    if not math.isfinite(denom):
        raise CoefficientBlowup(f"non-finite coefficient bound {denom}")
    return spec.sigma / denom


def step(state, dt: float, spec: ProblemSpec) -> np.ndarray:
    """One forward Euler step of the conservative scheme; boundary reset to psi."""
    u = np.asarray(state, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        new = u + dt * (divergence(u, spec) + rhs_values(u, spec))
    new[spec.boundary] = spec.psi
    if not np.all(np.isfinite(new)):
        raise NonFiniteState(None)
    return new


def snapshot_times(spec: ProblemSpec) -> np.ndarray:
    return spec.T * np.arange(spec.snapshots + 1) / spec.snapshots


def prepare(spec: ProblemSpec) -> float:
    """Check the structural hypotheses on ``F`` and return the sup bound ``M``."""
    from .estimates import compute_M

    M = compute_M(spec.u0, spec.rhs.a1, spec.rhs.a2, spec.T)
    check_hypotheses(spec.rhs, spec.grid, spec.exponents, M, node_gradient(spec.u0.values, spec.grid.h))
    return M


def solve(spec: ProblemSpec, K: float | None = None, monitor_weak: bool = True) -> Trajectory:
    """Integrate from 0 to ``T``, landing exactly on the snapshot times.

    ``K`` (if given) feeds the ``lipschitz_margin`` monitor column.
    """
    from .weakform import instant_residual, make_test_functions

    prepare(spec)
    phi = make_test_functions(1, spec)[0] if monitor_weak else None
    targets = snapshot_times(spec)
    u = np.array(spec.u0.values, dtype=float)
    times, states, rows = [0.0], [u.copy()], []
    t = 0.0
    for target in targets[1:]:
        while t < target:
            dt = stable_dt(u, spec)
            landing = t + dt >= target - 1e-12 * spec.T
            if landing:
                dt = target - t
            try:
                new = step(u, dt, spec)
            except NonFiniteState:
                raise NonFiniteState(t + dt) from None
            ut = (new - u) / dt
            weak = instant_residual(u, ut, t, phi, spec) if phi is not None else math.nan
            mdq = float(np.max(np.abs(ut)))
            t = target if landing else t + dt
            u = new
            rows.append(
                MonitorRow(
                    t=t,
                    dt=dt,
                    max_abs_u=float(np.max(np.abs(u))),
                    max_diff_quot=mdq,
                    y_t=energy(u, spec),
                    lipschitz_margin=(K - mdq) if K is not None else math.nan,
                    weak_residual_sample=weak,
                )
            )
        times.append(t)
        states.append(u.copy())
    log.info("solved to T=%g in %d steps", spec.T, len(rows))
    for s in states:
        s.setflags(write=False)
    return Trajectory(spec.grid, np.array(times), tuple(states), spec.reg.eps, tuple(rows))
