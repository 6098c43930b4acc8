"""Solving one problem for a decreasing sequence of regularization parameters.

The L2 distance between successive solutions is a Cauchy-type proxy for
convergence as eps -> 0; it says nothing about a rate.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import PxLapError
from .estimates import Constants, compute_constants, gradient_energy
from .problem import ProblemSpec
from .solver import Trajectory, solve
from .weakform import make_test_functions, weak_residual

STUDY_COLUMNS = ("eps", "max_y", "max_diff_quot", "d_k", "max_weak_residual")


@dataclass(frozen=True)
class StudyRow:
    eps: float
    max_y: float
    max_diff_quot: float
    d_k: float  # distance to the next (smaller) eps; nan on the last row
    max_weak_residual: float


@dataclass
class EpsilonStudy:
    constants: Constants
    rows: list[StudyRow]
    tol: float = 0.05
    trajectories: list[Trajectory] = field(default_factory=list, repr=False)

    @property
    def d(self) -> list[float]:
        return [r.d_k for r in self.rows[:-1]]

    @property
    def energy_uniform(self) -> bool:
        return all(r.max_y <= self.constants.B for r in self.rows)

    @property
    def rate_uniform(self) -> bool:
        return all(r.max_diff_quot <= (1.0 + self.tol) * self.constants.K for r in self.rows)

    @property
    def cauchy_decreasing(self) -> bool:
        d = self.d
        return all(b < a for a, b in zip(d, d[1:]))

    @property
    def passed(self) -> bool:
        return self.energy_uniform and self.rate_uniform

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(STUDY_COLUMNS)
            for r in self.rows:
                w.writerow([repr(float(getattr(r, c))) for c in STUDY_COLUMNS])


def l2_distance(a: Trajectory, b: Trajectory) -> float:
    """``max_t ||a(t) - b(t)||_{L2}`` over the common snapshot times."""
    if not np.array_equal(a.times, b.times):
        raise ValueError("trajectories must share snapshot times")
    grid = a.grid
    return max(math.sqrt(grid.integrate((ua - ub) ** 2)) for ua, ub in zip(a.states, b.states))


def epsilon_study(
    spec: ProblemSpec,
    eps_list: Sequence[float],
    tol: float = 0.05,
    weak_count: int = 6,
) -> EpsilonStudy:
    """Solve for each eps (strictly decreasing) on the same grid.

    The constants K and B are computed once, with ``eps0`` at least the
    largest eps of the list, and serve as the single eps-independent bounds.
    """
    eps_list = [float(e) for e in eps_list]
    if not eps_list:
        raise ValueError("eps_list is empty")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    eps0 = max(spec.reg.eps0, eps_list[0])
    constants = compute_constants(spec.with_eps(eps_list[0], eps0))
    trajs, partial = [], []
    for eps in eps_list:
        run = spec.with_eps(eps, eps0)
        try:
            traj = solve(run, K=constants.K)
        except PxLapError as exc:
            exc.eps = eps
            exc.args = (f"eps={eps}: {exc}",)
            raise
        y = gradient_energy(traj, run)
        mdq = max((m.max_diff_quot for m in traj.monitors), default=0.0)
        res = [abs(weak_residual(traj, phi, run)) for phi in make_test_functions(weak_count, run)]
        trajs.append(traj)
        partial.append((eps, float(y.max()), mdq, max(res)))
    rows = []
    for k, (eps, my, mdq, wr) in enumerate(partial):
        d = l2_distance(trajs[k], trajs[k + 1]) if k + 1 < len(trajs) else math.nan
        rows.append(StudyRow(eps, my, mdq, d, wr))
    return EpsilonStudy(constants, rows, tol, trajs)
