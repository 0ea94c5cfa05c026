"""Exception types shared across the workbench."""


class WorkbenchError(Exception):
    """Base class for all workbench errors."""


class InputError(WorkbenchError, ValueError):
    """Malformed or out-of-domain input (non-finite entries, bad shapes, parse failures)."""

    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column

    def __str__(self):
        msg = super().__str__()
        if self.line is not None:
            loc = f"line {self.line}"
            if self.column is not None:
                loc += f", column {self.column}"
            return f"{msg} ({loc})"
        return msg


class CapacityError(WorkbenchError):
    """A requested dense operation or assembled system exceeds the configured size limit."""


class NumericError(WorkbenchError, ArithmeticError):
    """A numerical routine failed (non-convergence, singular solve, step-size underflow)."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics
