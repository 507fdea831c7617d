"""Error taxonomy shared by every module.

The split mirrors the CLI exit codes: contract errors (bad inputs, violated
preconditions) exit 1, numeric errors (root-finder or quadrature failures,
overflow, statistical power loss) exit 2, and failed verification suites
exit 3 without raising.
"""

__all__ = [
    "QsdflowError",
    "ContractError",
    "UnsupportedClassificationError",
    "NoQsdError",
    "NumericError",
    "StatisticalPowerError",
]


class QsdflowError(Exception):
    """Base class for package errors."""


class ContractError(QsdflowError):
    """An input violated a documented precondition or invariant."""


class UnsupportedClassificationError(ContractError):
    """A mechanism does not carry enough declared structure to classify."""


class NoQsdError(ContractError):
    """No quasi-stationary distribution exists at the requested decay rate.

    Raised by the discrete spectrum computation when the rate is not an
    integer multiple of the base rate; the coefficient recursion then admits
    only the zero series.
    """


class NumericError(QsdflowError):
    """A numerical routine failed to reach the requested accuracy."""


class StatisticalPowerError(NumericError):
    """A conditional estimate has no accepted samples to work with."""
