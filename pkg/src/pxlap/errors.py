"""Exception hierarchy shared by all pxlap modules."""


class PxLapError(Exception):
    """Base class for every error raised by pxlap."""


# grid
class NonPositiveExtent(PxLapError, ValueError):
    pass


class TooCoarse(PxLapError, ValueError):
    pass


class ExponentDomain(PxLapError, ValueError):
    pass


# expr
class ExprError(PxLapError):
    pass


class ExprSyntaxError(ExprError, ValueError):
    def __init__(self, message, offset):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class UnknownFunction(ExprError, ValueError):
    def __init__(self, name, offset=None):
        super().__init__(f"unknown function {name!r}")
        self.name = name
        self.offset = offset


class UnboundVariable(ExprError, KeyError):
    def __init__(self, name):
        super().__init__(name)
        self.name = name

    def __str__(self):
        return f"unbound variable {self.name!r}"


class DomainError(ExprError, ArithmeticError):
    pass


# coefficients
class RegularizationFloor(PxLapError, ValueError):
    pass


class QuadratureBudget(PxLapError, RuntimeError):
    pass


class HypothesisViolation(PxLapError, ValueError):
    """A structural assumption on the problem data fails on the sample."""


class ExponentRangeViolation(HypothesisViolation):
    pass


class MonotonicityViolation(HypothesisViolation):
    pass


class GrowthViolation(HypothesisViolation):
    pass


# solver
class CoefficientBlowup(PxLapError, FloatingPointError):
    pass


class NonFiniteState(PxLapError, FloatingPointError):
    def __init__(self, t, message="non-finite value in updated state"):
        super().__init__(f"{message} at t={t!r}")
        self.t = t


# estimates / weakform
class NonFinite(PxLapError, FloatingPointError):
    pass


class InsufficientSnapshots(PxLapError, ValueError):
    pass


# cli
class ConfigError(PxLapError, ValueError):
    def __init__(self, key, message):
        super().__init__(f"[{key}] {message}")
        self.key = key
