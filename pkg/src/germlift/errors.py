"""Exception types shared across the package."""


class NonConvergentError(RuntimeError):
    """A scale-by-scale limit failed to settle within the schedule."""


class DivergenceSuspectedError(RuntimeError):
    """A dyadic series shows no decay; summing further would be meaningless."""


class AdmissibilityError(ValueError):
    """An exponent or order condition required by a construction is violated.

    The message names the condition that failed.
    """
