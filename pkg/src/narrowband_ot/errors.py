"""Exception types shared across the package."""


class NarrowbandError(Exception):
    """Base class for all package errors."""


class ConfigError(NarrowbandError):
    """Invalid configuration value or constraint violation."""


class DomainError(NarrowbandError):
    """Geometric evaluation requested outside the valid domain."""


class CoverageError(NarrowbandError):
    """A trilinear interpolation cell is not covered by grid nodes.

    Signals that epsilon/h is too small for the interpolation stencil.
    """


class SolverError(NarrowbandError):
    """Numerical failure inside the solver (non-finite values, degenerate
    density at a mapped point, failed root bracketing)."""
