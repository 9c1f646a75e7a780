#!/usr/bin/env python3

"""
Exception hierarchy for ConvexLab.
Each error clause of the numerical operations maps to one class here,
so callers can catch narrowly (and the CLI can map them to exit codes).

Part of the ConvexLab project.
"""


class ConvexLabError(Exception):
    """Base class for all ConvexLab errors."""


class InvalidArgumentError(ConvexLabError, ValueError):
    """An argument violates an operation's precondition."""


class EmptyRegionError(ConvexLabError, ValueError):
    """No mesh edge intersects the requested region."""


class OutOfTriangleError(ConvexLabError, ValueError):
    """A point lies outside the triangle it was evaluated on."""


class BoundaryTestFunctionError(ConvexLabError, ValueError):
    """A test function's support touches the domain boundary."""


class DegenerateDirectionsError(ConvexLabError, ValueError):
    """Two direction vectors are (numerically) dependent."""


class OutOfDomainError(ConvexLabError, ValueError):
    """A sample point lies outside the domain."""


class PatchOutOfDomainError(ConvexLabError, ValueError):
    """A consistency patch does not fit inside its domain."""


class DegenerateDataError(ConvexLabError, ValueError):
    """Convergence data cannot be fitted (mixed zero and nonzero samples)."""


class MeshFormatError(ConvexLabError, ValueError):
    """A mesh or matrix text file is malformed."""


class SolverError(ConvexLabError, RuntimeError):
    """The QP solver could not produce an iterate."""
