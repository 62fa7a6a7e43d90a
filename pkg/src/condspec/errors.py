"""Exception hierarchy.

Every error carries an ``exit_code`` so the command line front end can map
failures to distinct process statuses without a lookup table of its own.
"""


class CondSpecError(Exception):
    exit_code = 1


class DomainError(CondSpecError, ValueError):
    exit_code = 3


class SpecParseError(CondSpecError):
    exit_code = 4

    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where += f"{source}:"
        if line is not None:
            where += f"line {line}: "
        elif where:
            where += " "
        super().__init__(where + message)


class HorizonError(CondSpecError):
    """Requested index lies beyond a precomputed horizon."""

    exit_code = 5


class SizeError(CondSpecError):
    """Brute-force guard exceeded."""

    exit_code = 5


class TiltDivergenceError(CondSpecError):
    exit_code = 6


class InconsistentModelError(CondSpecError):
    exit_code = 7


class ConditioningImpossibleError(CondSpecError):
    exit_code = 8


class BudgetError(CondSpecError):
    exit_code = 9


class TailUnknownError(CondSpecError):
    exit_code = 10


class InsufficientDataError(CondSpecError):
    exit_code = 11


class ExhaustionError(CondSpecError):
    """Rejection sampler ran out of tries.  Raised only on request."""

    exit_code = 12


class FamilyError(CondSpecError):
    exit_code = 13


class InternalConsistencyError(CondSpecError):
    exit_code = 14


# not an exception class: status for a verification command whose check fails
VERIFICATION_FAILED = 20
