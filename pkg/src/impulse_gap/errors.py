"""Exception hierarchy.

Two families matter to the command line: input problems (exit code 2) and
numerical breakdowns (exit code 3). Each concrete error lives in the module
that raises it and derives from one of the two bases below.
"""


class ImpulseGapError(Exception):
    """Root of every error raised by this package."""


class InputError(ImpulseGapError, ValueError):
    """Malformed or inconsistent user input."""


class NumericalError(ImpulseGapError, ArithmeticError):
    """A computation left the domain where it is well defined."""


def qualified_name(exc: BaseException) -> str:
    """Return ``module.ClassName`` for reports, e.g. ``process.NotStrictPositive``."""
    module = type(exc).__module__.rsplit(".", 1)[-1]
    return f"{module}.{type(exc).__name__}"
