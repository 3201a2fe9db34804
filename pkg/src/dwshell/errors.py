"""Exception types shared across the package."""


class DwshellError(Exception):
    """Base class for all package errors."""


class InputError(DwshellError):
    """Malformed or inconsistent user input (files, matrices, parameters)."""


class ZeroMatrixError(InputError):
    """Raised where the zero matrix has no meaningful answer (phase extraction)."""


class NotGroundedError(InputError):
    """Network has no path to ground, so the Laplacian is singular."""


class SingularInteriorError(InputError):
    """Interior subnetwork cannot be eliminated (singular interior block)."""


class UnstableBlockError(InputError):
    """A converter block is not open-loop stable."""


class AlgebraicLoopError(DwshellError):
    """The static interconnection matrix is singular; closed loop is ill posed."""


class MarginalLocusError(DwshellError):
    """Determinant locus passes too close to the origin to count encirclements."""
