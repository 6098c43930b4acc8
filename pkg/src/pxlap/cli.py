"""Command line entry point.

Usage::

    pxlap solve --config problem.ini --out results/
    pxlap study-epsilon --config problem.ini --out results/
    pxlap report --config problem.ini --out results/

Exit status is 0 when every enabled check passes, 1 when a check fails and
2 for configuration or solver errors.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import expr as ex
from .coefficients import ExponentField, Regularization, RhsSpec, coordinate_binding, mollify_f0
from .continuation import epsilon_study
from .errors import ConfigError, ExprError, HypothesisViolation, PxLapError
from .estimates import DESCRIPTIONS, EstimateReport, CheckRecord, compute_M, compute_constants, verify
from .grid import Domain, Grid, ScalarField
from .problem import ProblemSpec
from .solver import Trajectory, solve
from .weakform import residual_table, write_residual_table

log = logging.getLogger("pxlap")

COMMANDS = ("solve", "study-epsilon", "report")
EXIT_OK, EXIT_CHECK_FAILED, EXIT_ERROR = 0, 1, 2

ALLOWED = {
    "domain": {"lower", "upper", "counts"},
    "exponents": {"kind", "p", "p1", "p2", "p3"},
    "rhs": {"kind", "f", "f1", "f2", "f3", "f0", "a1", "a2", "alpha", "beta", "ptilde", "mollify"},
    "initial": {"u0"},
    "time": {"t", "sigma", "snapshots"},
    "regularization": {"eps", "eps0", "eps_min"},
    "checks": {"tolerance_lipschitz", "weak_tolerance", "weak_count"} | set(DESCRIPTIONS),
    "study": {"eps_list"},
}


class Config:
    """Thin accessor over a parsed ini file that reports errors by key path."""

    def __init__(self, parser: configparser.ConfigParser):
        self.cp = parser
        for section in parser.sections():
            if section not in ALLOWED:
                raise ConfigError(section, "unknown section")
            for key in parser[section]:
                if key not in ALLOWED[section]:
                    raise ConfigError(f"{section}.{key}", "unknown key")

    @classmethod
    def load(cls, path) -> "Config":
        path = Path(path)
        if not path.is_file():
            raise ConfigError("config", f"file not found: {path}")
        cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        cp.optionxform = str.lower
        try:
            cp.read(path)
        except configparser.Error as exc:
            raise ConfigError("config", str(exc)) from None
        return cls(cp)

    def raw(self, section, key, default=None):
        if self.cp.has_option(section, key):
            value = self.cp.get(section, key).strip()
            if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
                value = value[1:-1]
            return value
        if default is None:
            raise ConfigError(f"{section}.{key}", "missing required key")
        return default

    def has(self, section, key):
        return self.cp.has_option(section, key)

    def number(self, section, key, default=None) -> float:
        value = self.raw(section, key, None if default is None else str(default))
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"{section}.{key}", f"not a number: {value!r}") from None

    def numbers(self, section, key, default=None) -> list[float]:
        value = self.raw(section, key, default)
        try:
            return [float(v) for v in value.split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"{section}.{key}", f"not a list of numbers: {value!r}") from None

    def flag(self, section, key, default: bool) -> bool:
        if not self.has(section, key):
            return default
        try:
            return self.cp.getboolean(section, key)
        except ValueError:
            raise ConfigError(f"{section}.{key}", "expected a boolean") from None

    def expression(self, section, key, default=None) -> ex.Expr:
        text = self.raw(section, key, default)
        try:
            return ex.parse(text)
        except ExprError as exc:
            raise ConfigError(f"{section}.{key}", f"bad expression {text!r}: {exc}") from None


def build_spec(cfg: Config) -> ProblemSpec:
    lower = cfg.numbers("domain", "lower", "0")
    upper = cfg.numbers("domain", "upper", "1")
    counts = cfg.numbers("domain", "counts", "64")
    if len(counts) == 1 and len(lower) > 1:
        counts = counts * len(lower)
    try:
        grid = Grid(Domain(tuple(lower), tuple(upper)), tuple(int(c) for c in counts))
    except (PxLapError, ValueError) as exc:
        raise ConfigError("domain", str(exc)) from None
    n = grid.n

    kind = cfg.raw("exponents", "kind", "anisotropic")
    if kind not in ("anisotropic", "isotropic"):
        raise ConfigError("exponents.kind", f"expected anisotropic or isotropic, got {kind!r}")
    isotropic = kind == "isotropic"
    if isotropic or cfg.has("exponents", "p"):
        keys = ["p"] * (1 if isotropic else n)
    else:
        keys = [f"p{i + 1}" for i in range(n)]
    ps = [cfg.expression("exponents", k) for k in keys]
    try:
        exponents = ExponentField.sample(ps, grid, isotropic)
    except HypothesisViolation as exc:
        raise ConfigError(f"exponents.{keys[0]}", str(exc)) from None
    except ExprError as exc:
        raise ConfigError(f"exponents.{keys[0]}", str(exc)) from None

    rkind = cfg.raw("rhs", "kind", "linear")
    if rkind not in ("linear", "growth"):
        raise ConfigError("rhs.kind", f"expected linear or growth, got {rkind!r}")
    if rkind == "growth" and isotropic:
        term_keys = ["f"] if cfg.has("rhs", "f") else []
    else:
        term_keys = [f"f{i + 1}" for i in range(n)]
        if not any(cfg.has("rhs", k) for k in term_keys):
            term_keys = []
    terms = tuple(cfg.expression("rhs", k, "0") for k in term_keys)
    f0 = cfg.expression("rhs", "f0") if cfg.has("rhs", "f0") else None
    ptilde = None
    if cfg.has("rhs", "ptilde"):
        pt = cfg.numbers("rhs", "ptilde")
        ptilde = pt[0] if len(pt) == 1 else tuple(pt)
    try:
        rhs = RhsSpec(
            kind=rkind,
            terms=terms,
            f0=f0,
            a1=cfg.number("rhs", "a1", 0.0),
            a2=cfg.number("rhs", "a2", 0.0),
            alpha=cfg.number("rhs", "alpha", 0.0),
            beta=cfg.number("rhs", "beta", 0.0),
            ptilde=ptilde,
        )
    except ValueError as exc:
        raise ConfigError("rhs", str(exc)) from None

    u0_expr = cfg.expression("initial", "u0")
    try:
        u0 = ScalarField(grid, ex.evaluate_on(u0_expr, coordinate_binding(grid), grid.shape))
    except (ExprError, PxLapError) as exc:
        raise ConfigError("initial.u0", str(exc)) from None

    T = cfg.number("time", "t")
    try:
        reg = Regularization(
            cfg.number("regularization", "eps", 1e-4),
            cfg.number("regularization", "eps0") if cfg.has("regularization", "eps0") else None,
            cfg.number("regularization", "eps_min", 1e-8),
        )
    except (PxLapError, ValueError) as exc:
        raise ConfigError("regularization", str(exc)) from None
    try:
        spec = ProblemSpec(
            grid=grid,
            kind=kind,
            exponents=exponents,
            rhs=rhs,
            reg=reg,
            u0=u0,
            T=T,
            sigma=cfg.number("time", "sigma", 0.9),
            snapshots=int(cfg.number("time", "snapshots", 32)),
            u0_expr=u0_expr,
        )
    except (PxLapError, ValueError) as exc:
        raise ConfigError("time", str(exc)) from None

    if f0 is not None and cfg.flag("rhs", "mollify", False):
        M = compute_M(u0, rhs.a1, rhs.a2, T)
        table = mollify_f0(f0, reg.eps, grid, M)
        spec = spec.with_rhs(replace(rhs, f0_table=table))
    return spec


def enabled_checks(cfg: Config) -> set[str]:
    defaults = {name: name != "weak_residual" for name in DESCRIPTIONS}
    if cfg.has("checks", "weak_tolerance"):
        defaults["weak_residual"] = True
    return {name for name, on in defaults.items() if cfg.flag("checks", name, on)}


def _weak_record(traj, spec, cfg) -> tuple[CheckRecord, list]:
    count = int(cfg.number("checks", "weak_count", 6))
    rows = residual_table(traj, spec, count)
    worst = max(abs(r[2]) for r in rows)
    tol = cfg.number("checks", "weak_tolerance", 1e-3)
    return CheckRecord("weak_residual", tol, tol - worst, worst <= tol, (), tol), rows


def _finish_report(report: EstimateReport, traj, spec, cfg, out: Path) -> int:
    enabled = enabled_checks(cfg)
    if len(traj) >= 8:
        record, rows = _weak_record(traj, spec, cfg)
        write_residual_table(out / "weak_residuals.csv", rows)
        if "weak_residual" in enabled:
            report.records.append(record)
    report.write_csv(out / "report.csv")
    text = report.summary()
    (out / "report.txt").write_text(text + "\n")
    print(text)
    for r in report.failures:
        print(f"check failed: {r.name} ({r.description})", file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def run_config(path, command: str, out_dir) -> int:
    if command not in COMMANDS:
        raise ValueError(f"unknown command {command!r}")
    cfg = Config.load(path)
    spec = build_spec(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tol = cfg.number("checks", "tolerance_lipschitz", 0.05)
    enabled = enabled_checks(cfg)

    if command == "solve":
        constants = compute_constants(spec)
        traj = solve(spec, K=constants.K)
        traj.write(out)
        report = verify(traj, spec, constants, tol, enabled)
        return _finish_report(report, traj, spec, cfg, out)

    if command == "report":
        traj = Trajectory.read(out, spec.reg.eps, spec.grid)
        report = verify(traj, spec, None, tol, enabled)
        return _finish_report(report, traj, spec, cfg, out)

    eps_list = cfg.numbers("study", "eps_list", "1e-2, 1e-3, 1e-4, 1e-5")
    try:
        study = epsilon_study(spec, eps_list, tol, int(cfg.number("checks", "weak_count", 6)))
    except ValueError as exc:
        raise ConfigError("study.eps_list", str(exc)) from None
    study.write_csv(out / "study.csv")
    for r in study.rows:
        print(f"eps={r.eps:.3g} max_y={r.max_y:.6g} max_diff_quot={r.max_diff_quot:.6g} d_k={r.d_k:.3e}")
    if not study.energy_uniform:
        print("check failed: energy_gronwall (max_t y(t) <= B for every eps)", file=sys.stderr)
    if not study.rate_uniform:
        print("check failed: time_lipschitz (max difference quotient <= (1+tol) K for every eps)", file=sys.stderr)
    return EXIT_OK if study.passed else EXIT_CHECK_FAILED


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pxlap",
        description="Solve regularized p(x)-Laplacian problems and check their a-priori estimates.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="ini-style problem description")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return run_config(args.config, args.command, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (PxLapError, OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
