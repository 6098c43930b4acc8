import math

import pytest

from pxlap.coefficients import RhsSpec
from pxlap.expr import parse
from pxlap.grid import Domain
from pxlap.problem import make_problem

PI = repr(math.pi)
UNIT = Domain((0.0,), (1.0,))
SQUARE = Domain((0.0, 0.0), (1.0, 1.0))

# filled by test_acceptance, printed at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def heat_problem(counts=64, T=0.1, snapshots=32, **kw):
    return make_problem(UNIT, counts, p="0", u0=f"sin({PI}*x1)", T=T, snapshots=snapshots, **kw)


def quadratic_problem(counts=64, T=0.1, p="2", eps=1e-4, **kw):
    return make_problem(UNIT, counts, p=p, u0="x1*(1-x1)", T=T, eps=eps, **kw)


def iso2d_problem(counts=32, T=0.05, eps=1e-4, **kw):
    return make_problem(
        SQUARE,
        (counts, counts),
        kind="isotropic",
        p=f"1+0.5*sin({PI}*x1)*sin({PI}*x2)",
        u0=f"sin({PI}*x1)*sin({PI}*x2)",
        T=T,
        eps=eps,
        rhs=RhsSpec(f0=parse("-u^3")),
        **kw,
    )


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture(scope="session")
def heat64():
    from pxlap.solver import solve

    spec = heat_problem(64)
    return spec, solve(spec)
