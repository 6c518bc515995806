"""Exception hierarchy shared across the package.

The CLI maps these to process exit codes, so keep the classes stable.
"""


class GapLearnError(Exception):
    """Base class for all package errors."""


class ConfigError(GapLearnError):
    """Invalid experiment configuration (CLI exit code 2)."""


class CapacityError(GapLearnError):
    """A combinatorial enumeration exceeded its configured cap (CLI exit code 3)."""


class SolverError(GapLearnError):
    """Game solver failed to converge within its iteration cap (CLI exit code 4)."""


class AmbiguousLabelError(GapLearnError):
    """A support point has utility gap exactly zero where a pinned label is required."""
