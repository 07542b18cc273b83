"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: input/format and generic solver
failures exit 1, an infeasible problem exits 2.
"""


class FairflowError(Exception):
    """Base class for all package-specific errors."""


class InputFormatError(FairflowError):
    """An input file or in-memory structure fails schema or range checks."""


class InfeasibleProblemError(FairflowError):
    """The constraint system admits no point satisfying the allocation floor."""


class SolverError(FairflowError):
    """A solver failed to produce a trustworthy answer (stall, bad residuals)."""


class LpStalledError(SolverError):
    """The simplex iteration cap was exceeded before reaching a conclusion."""
