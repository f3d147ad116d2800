"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes, so library code raises them instead of
printing or returning sentinels.
"""


class MutredError(Exception):
    """Base class for toolkit errors."""


class InputError(MutredError, ValueError):
    """Malformed input: unknown ids, bad CSV, out-of-range parameters."""


class DomainError(MutredError, ValueError):
    """Input is well-formed but the quantity is undefined for it."""


class InfeasibleError(MutredError):
    """A strategy cannot produce the requested number of mutants."""


class ResourceError(MutredError):
    """A guard against exponential work was tripped."""
