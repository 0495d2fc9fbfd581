"""Exception hierarchy shared by all modules.

``InputError`` subtypes map to CLI exit code 1, ``AnomalyError`` to exit
code 2 (a measured quantity violated an inequality that should hold).
"""


class RieszError(Exception):
    """Base class for all package errors."""


class InputError(RieszError):
    """Bad argument or violated precondition."""


class DimensionMismatchError(InputError):
    pass


class SingularityError(InputError):
    """Kernel evaluated on the diagonal without an active truncation."""


class EmptyRegionError(InputError):
    """Zero mass where positive mass is required."""


class AdmissibilityError(InputError):
    """An atom sits on a face of the dyadic grid."""


class ConfigurationError(InputError):
    """Inconsistent parameters (scale window, Whitney/goodness relation, ...)."""


class PartitionError(InputError):
    """Partition cells overlap, escape the root, or break the overlap bound."""


class CoverageError(InputError):
    """A Haar coefficient could not be assigned to any stopping node."""


class DegenerateEnclosureError(InputError):
    """No shifted family encloses the requested cube."""


class UndefinedSupError(InputError):
    """Every cube of the family was skipped; the supremum is undefined."""


class ConvergenceError(RieszError):
    """Iteration cap reached. Carries the last iterate value."""

    def __init__(self, message, last_value=None):
        super().__init__(message)
        self.last_value = last_value


class AnomalyError(RieszError):
    """A measured ratio/inequality check failed (CLI exit code 2)."""
