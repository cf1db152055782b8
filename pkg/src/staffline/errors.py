"""Exception hierarchy shared by the model, the file readers/writers and
the analysis estimators."""


class StafflineError(Exception):
    """Base class for all errors raised by staffline."""


class DomainError(StafflineError, ValueError):
    """An argument lies outside the domain of an operation."""


class StateError(StafflineError, RuntimeError):
    """The object is in the wrong state for the requested operation."""


class IntegrityError(StafflineError):
    """The operation would leave dangling cross-references."""


class ParseError(StafflineError):
    """Input bytes could not be decoded."""

    def __init__(self, message, line=None, column=None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column


class UnsupportedFormatError(StafflineError):
    """Well-formed input in a flavour that is not supported."""


class StructureError(StafflineError):
    """Decodable input whose musical structure is inconsistent."""


class CapacityError(StafflineError):
    """A value exceeds a format limit."""


class ValidationError(StafflineError):
    """A part violates model invariants; carries the violation list."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations[:5])
        more = len(self.violations) - 5
        if more > 0:
            lines += f"; ... ({more} more)"
        super().__init__(f"{len(self.violations)} invariant violation(s): {lines}")
