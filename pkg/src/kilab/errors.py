"""Exception hierarchy shared across the package.

Exit-code mapping used by the CLI: UsageError -> 1, NumericalError -> 2,
VerificationError -> 3.
"""


class KilabError(Exception):
    """Base class for all package errors."""


class UsageError(KilabError):
    """Invalid arguments, preconditions, or configuration."""


class NumericalError(KilabError):
    """A numerical procedure failed (factorization, quadrature, eigensolver)."""


class VerificationError(KilabError):
    """An internal invariant check failed."""
