"""A-priori constants and runtime checks of the estimates they imply.

Checks produced here:

``sup_bound``
    ``|u| <= M``; ``M`` closes the comparison ODE ``(m^2)' = 2 a1 m^2 + 2 a2``.
``initial_lipschitz``
    ``|u(t) - u0| <= K t``.
``time_lipschitz``
    ``|u(t) - u(tau)| <= K |t - tau|`` over every pair of stored snapshots.
``energy_gronwall``
    ``max_t y(t) <= B = (C1 + C2 T) exp(C3 T)`` for the gradient energy ``y``.
``energy_dissipation``
    ``y`` nonincreasing step to step when ``F = 0`` and ``psi`` is constant
    (snapshot to snapshot when no monitor rows are available).
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import NonFinite
from .grid import ScalarField, node_gradient
from .problem import ProblemSpec, divergence, energy

U_SAMPLES = 33
DISSIPATION_TOL = 1e-8

DESCRIPTIONS = {
    "sup_bound": "|u(t,x)| <= M",
    "initial_lipschitz": "|u(t,x) - u0(x)| <= K t",
    "time_lipschitz": "|u(t,x) - u(tau,x)| <= K |t - tau| for all snapshot pairs",
    "energy_gronwall": "max_t y(t) <= B = (C1 + C2 T) exp(C3 T)",
    "energy_dissipation": "y(t) nonincreasing along the steps (F = 0)",
    "weak_residual": "|R(phi)| <= tolerance over the test-function family",
}


@dataclass(frozen=True)
class Constants:
    M: float
    K: float
    C1: float = math.nan
    C2: float = math.nan
    C3: float = math.nan
    c_p: float = math.nan
    p0: float = math.nan
    B: float = math.nan


@dataclass(frozen=True)
class CheckRecord:
    name: str
    constant: float
    margin: float
    passed: bool
    location: tuple = ()
    tolerance: float = 0.0
    detail: str = ""

    @property
    def description(self) -> str:
        return DESCRIPTIONS.get(self.name, self.name)


@dataclass
class EstimateReport:
    constants: Constants
    records: list[CheckRecord] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    @property
    def failures(self) -> list[CheckRecord]:
        return [r for r in self.records if not r.passed]

    def __getitem__(self, name: str) -> CheckRecord:
        for r in self.records:
            if r.name == name:
                return r
        raise KeyError(name)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("name", "constant", "margin", "pass"))
            for r in self.records:
                w.writerow((r.name, repr(float(r.constant)), repr(float(r.margin)), int(r.passed)))

    def summary(self) -> str:
        c = self.constants
        lines = ["constants:"]
        lines += [f"  {k} = {v:.10g}" for k, v in asdict(c).items()]
        lines.append("checks:")
        for r in self.records:
            status = "PASS" if r.passed else "FAIL"
            loc = f" at {r.location}" if r.location else ""
            extra = f" ({r.detail})" if r.detail else ""
            lines.append(
                f"  [{status}] {r.name}: {r.description}; margin {r.margin:.6g}{loc}{extra}"
            )
        return "\n".join(lines)


def _max_abs(u0) -> float:
    if isinstance(u0, ScalarField):
        return float(np.max(np.abs(u0.values)))
    return float(np.max(np.abs(np.asarray(u0, dtype=float))))


def compute_M(u0, a1: float, a2: float, T: float) -> float:
    """Sup bound from the comparison ODE ``(m^2)' = 2 a1 m^2 + 2 a2``, ``m(0) = max|u0|``."""
    if a1 < 0 or a2 < 0:
        raise ValueError("a1 and a2 must be nonnegative")
    if not T > 0:
        raise ValueError("T must be positive")
    m0 = _max_abs(u0)
    x = 2.0 * a1 * T
    # (e^x - 1)/x, stable for tiny and subnormal a1 where a2/a1 would overflow
    ratio = math.expm1(x) / x if x > 0 else 1.0
    return math.sqrt(math.exp(x) * m0 * m0 + 2.0 * a2 * T * ratio)


def _u_samples(M: float) -> np.ndarray:
    if M == 0:
        return np.zeros(1)
    return np.unique(np.concatenate(([-M, M], np.linspace(-M, M, U_SAMPLES))))


def compute_K_terms(spec: ProblemSpec, M: float) -> tuple[float, float]:
    """The two maxima making up ``K``: the flux divergence of ``u0`` over the
    sampled ``eps`` values, and ``|F(x, u, grad u0)|`` over ``u`` in ``[-M, M]``."""
    u0 = np.asarray(spec.u0.values, dtype=float)
    flux_term = 0.0
    interior = spec.grid.interior()
    for eps in spec.reg.sup_samples():
        with np.errstate(all="ignore"):
            div = divergence(u0, spec, eps)[interior]
        if not np.all(np.isfinite(div)):
            raise NonFinite(
                f"flux divergence of u0 is not finite at eps={eps}; "
                "the initial datum violates the finiteness assumption"
            )
        if div.size:
            flux_term = max(flux_term, float(np.max(np.abs(div))))
    grads = node_gradient(u0, spec.grid.h)
    rhs_term = 0.0
    if not spec.rhs.is_zero:
        for u in _u_samples(M):
            F = spec.rhs.evaluate(spec.binding, np.full(u0.shape, u), grads, spec.isotropic)
            if not np.all(np.isfinite(F)):
                raise NonFinite(f"F(x, u, grad u0) is not finite at u={u}")
            rhs_term = max(rhs_term, float(np.max(np.abs(F))))
    return flux_term, rhs_term


def compute_K(spec: ProblemSpec, M: float) -> float:
    flux_term, rhs_term = compute_K_terms(spec, M)
    return flux_term + rhs_term


def max_abs_f0(spec: ProblemSpec, M: float) -> float:
    rhs = spec.rhs
    if rhs.f0 is None and rhs.f0_table is None:
        return 0.0
    shape = spec.grid.shape
    return max(
        float(np.max(np.abs(rhs.f0_values(spec.binding, np.full(shape, u))))) for u in _u_samples(M)
    )


def gronwall_constants(spec: ProblemSpec, K: float, M: float) -> dict[str, float]:
    """Constants of the integral inequality ``y(t) <= C1 + int_0^T (C2 + C3 y)``
    and its Gronwall ceiling ``B``."""
    grid = spec.grid
    vol = grid.domain.volume
    c_p = vol + 1.0
    p0 = spec.exponents.p_max
    eps0 = spec.reg.eps0
    grads = node_gradient(np.asarray(spec.u0.values, dtype=float), grid.h)
    if spec.isotropic:
        p = spec.exponents.values[0]
        s = sum(g * g for g in grads) + eps0
        C1 = grid.integrate(s ** ((p + 2.0) / 2.0) / (p + 2.0))
        terms = 1
    else:
        C1 = sum(
            grid.integrate((g * g + eps0) ** ((p + 2.0) / 2.0) / (p + 2.0))
            for p, g in zip(spec.exponents.values, grads)
        )
        terms = grid.n
    alpha, beta = spec.rhs.alpha, spec.rhs.beta
    f0max = max_abs_f0(spec, M)
    C2 = K * (terms * alpha * (p0 + 1.0) * c_p * vol + (terms * beta + f0max) * vol)
    C3 = c_p * K * alpha * (p0 + 2.0)
    B = (C1 + C2 * spec.T) * math.exp(C3 * spec.T)
    return dict(C1=C1, C2=C2, C3=C3, c_p=c_p, p0=p0, B=B)


def compute_constants(spec: ProblemSpec) -> Constants:
    M = compute_M(spec.u0, spec.rhs.a1, spec.rhs.a2, spec.T)
    K = compute_K(spec, M)
    return Constants(M=M, K=K, **gronwall_constants(spec, K, M))


def check_bounds(traj, constants: Constants, tol: float = 0.05) -> list[CheckRecord]:
    """Sup bound and the two time-Lipschitz checks.

    Margins are absolute (``M - max|u|``, ``min (K t - |u - u0|)``, ...);
    the Lipschitz checks pass when every difference stays below
    ``(1 + tol) K |t - tau|``.
    """
    M, K = constants.M, constants.K
    stack = traj.stack
    times = traj.times
    atol = 1e-12 * max(1.0, M)

    umax = np.abs(stack).max(axis=tuple(range(1, stack.ndim)))
    k = int(np.argmax(umax))
    sup = CheckRecord(
        "sup_bound", M, M - float(umax[k]), bool(umax[k] <= M + atol), (float(times[k]),), atol
    )

    # all ordered pairs i < j; the i = 0 row is the initial-time check
    best = (math.inf, None)
    ok = True
    init_best = (math.inf, None)
    init_ok = True
    for i in range(len(times) - 1):
        diff = np.abs(stack[i + 1 :] - stack[i])
        gap = times[i + 1 :] - times[i]
        flat = diff.reshape(len(gap), -1)
        dmax = flat.max(axis=1)
        margins = K * gap - dmax
        j = int(np.argmin(margins))
        node = np.unravel_index(int(np.argmax(flat[j])), stack.shape[1:])
        loc = (float(times[i + j + 1]), float(times[i]), tuple(int(v) for v in node))
        within = bool(np.all(dmax <= (1.0 + tol) * K * gap + atol))
        if margins[j] < best[0]:
            best = (float(margins[j]), loc)
        ok &= within
        if i == 0:
            init_best = (float(margins[j]), (loc[0],))
            init_ok = within
    records = [sup]
    if len(times) > 1:
        records.append(
            CheckRecord("initial_lipschitz", K, init_best[0], init_ok, init_best[1], tol)
        )
        records.append(CheckRecord("time_lipschitz", K, best[0], ok, best[1], tol))
    return records


def gradient_energy(traj, spec: ProblemSpec) -> np.ndarray:
    return np.array([energy(u, spec) for u in traj.states])


def check_gronwall(y, B: float) -> CheckRecord:
    y = np.asarray(y, dtype=float)
    k = int(np.argmax(y))
    margin = float(B - y[k])
    return CheckRecord("energy_gronwall", B, margin, bool(margin >= 0), (k,))


def check_dissipation(y0: float, y_steps, tol: float = DISSIPATION_TOL) -> CheckRecord:
    ys = np.concatenate(([y0], np.asarray(y_steps, dtype=float)))
    if len(ys) < 2:
        return CheckRecord("energy_dissipation", tol, tol, True)
    inc = np.diff(ys)
    k = int(np.argmax(inc))
    margin = float(tol - inc[k])
    return CheckRecord("energy_dissipation", tol, margin, bool(margin >= 0), (k + 1,), tol)


def dissipation_applies(spec: ProblemSpec) -> bool:
    psi = spec.psi
    return spec.rhs.is_zero and (psi.size == 0 or np.ptp(psi) <= 1e-12 * (1.0 + np.max(np.abs(psi))))


def verify(
    traj,
    spec: ProblemSpec,
    constants: Constants | None = None,
    tol: float = 0.05,
    checks: set[str] | None = None,
) -> EstimateReport:
    """Run every enabled check on ``traj``; ``checks=None`` enables all that apply."""
    constants = compute_constants(spec) if constants is None else constants
    enabled = set(DESCRIPTIONS) if checks is None else set(checks)
    report = EstimateReport(constants)
    for r in check_bounds(traj, constants, tol):
        if r.name in enabled:
            report.records.append(r)
    if "energy_gronwall" in enabled:
        report.records.append(check_gronwall(gradient_energy(traj, spec), constants.B))
    if "energy_dissipation" in enabled and dissipation_applies(spec):
        if traj.monitors:
            y0 = energy(np.asarray(traj.states[0]), spec)
            report.records.append(check_dissipation(y0, [m.y_t for m in traj.monitors]))
        else:
            # stored snapshots only: check monotonicity at snapshot resolution
            y = gradient_energy(traj, spec)
            report.records.append(check_dissipation(y[0], y[1:]))
    return report
