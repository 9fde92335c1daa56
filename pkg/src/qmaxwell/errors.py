"""Exception hierarchy shared by the library and the CLI."""


class QMaxwellError(Exception):
    """Base class for all qmaxwell errors."""


class NotPositiveSemidefinite(QMaxwellError):
    """An operator that must be PSD has an eigenvalue below tolerance."""


class NonPositiveDensity(QMaxwellError):
    """A density profile touches zero or goes negative somewhere."""


class BasisMismatch(QMaxwellError):
    """Two objects built on incompatible spectral bases were combined."""


class SingularDensityOperator(QMaxwellError):
    """An operation requiring a positive spectrum met a negative eigenvalue."""


class SolverError(QMaxwellError):
    """Base class for solver failures; carries the partial report."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class MaxIterExceeded(SolverError):
    """Iteration budget exhausted before the residual tolerance was met."""


class BasisTooSmall(SolverError):
    """The constraint is not representable at the current mode cutoff.

    ``suggested_modes`` is the smallest cutoff whose spectral tail of the
    target density falls below the requested tolerance.
    """

    def __init__(self, message, suggested_modes, report=None):
        super().__init__(message, report)
        self.suggested_modes = suggested_modes


class DensityFileError(QMaxwellError):
    """Base class for density CSV ingestion failures."""


class MalformedRow(DensityFileError):
    def __init__(self, message, line_number):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class NonUniformGrid(DensityFileError):
    pass


class DuplicatedEndpoint(DensityFileError):
    pass


class PotentialExprError(QMaxwellError):
    """The restricted potential expression grammar was violated."""
