"""Exception hierarchy shared by all modules."""


class SitawareError(Exception):
    pass


class ParseError(SitawareError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(SitawareError, ValueError):
    pass


class ValidationError(SitawareError, ValueError):
    """Raised with the full list of invariant violations attached."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class DomainError(SitawareError, ValueError):
    pass


class ShapeError(SitawareError, ValueError):
    pass


class SizeError(SitawareError, ValueError):
    pass


class UnsupportedModeError(SitawareError, ValueError):
    pass


class TrainingDivergedError(SitawareError, RuntimeError):
    def __init__(self, step, message="non-finite loss"):
        self.step = step
        super().__init__(f"{message} at step {step}")
