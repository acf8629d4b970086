"""Exception hierarchy shared by all gapde modules."""


class GapdeError(Exception):
    """Base class for errors raised by gapde."""


class StructuralError(GapdeError, ValueError):
    """Inputs have the wrong shape, size or structure."""


class ConfigurationError(GapdeError, ValueError):
    """A configuration value is invalid or unsupported."""


class DivergenceError(GapdeError, ArithmeticError):
    """A time integrator produced non-finite values."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class TrainingError(GapdeError, ArithmeticError):
    """Surrogate training diverged."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class StageError(GapdeError):
    """A pipeline stage failed; carries the stage name and the original cause."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause!r}")
        self.stage = stage
        self.cause = cause
