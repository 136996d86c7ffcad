"""Exceptions raised by hybridoc.

Library code raises these; only MainApp maps them to exit codes.
"""


class HybridocError(Exception):
    """Base class for all hybridoc errors."""
    exit_code = 1


class DimensionError(HybridocError, ValueError):
    """Operator, state or space dimensions do not fit together."""


class StateIndexError(HybridocError, IndexError):
    """Fock index outside the truncated space."""


class ConfigError(HybridocError, ValueError):
    """Malformed parameter or problem file."""
    exit_code = 2

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if field is not None:
            where.append("field '%s'" % field)
        if line is not None:
            where.append("line %d" % line)
        if where:
            message = "%s (%s)" % (message, ", ".join(where))
        super(ConfigError, self).__init__(message)


class MissingInputError(HybridocError, FileNotFoundError):
    """An upstream artifact is missing."""
    exit_code = 2

    def __init__(self, path, producer):
        self.path = path
        self.producer = producer
        super(MissingInputError, self).__init__(
            "%s not found, run 'hybridoc %s' first" % (path, producer))


class NumericalError(HybridocError, ArithmeticError):
    exit_code = 3


class AmbiguousSteadyStateError(NumericalError):
    """The Liouvillian has more than one (near) zero eigenvalue."""


class NormalityError(NumericalError):
    """Generator is not normal, the spectral derivative does not apply."""


class PositivityError(NumericalError):
    """A propagated state left the set of density operators."""


class GridTooSmallError(NumericalError):
    """Wigner function has not decayed at the edge of the grid."""


class AcceptanceError(HybridocError):
    """A --check threshold was missed."""
    exit_code = 4
