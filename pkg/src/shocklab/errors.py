"""Exception hierarchy shared by every stage of the pipeline."""


class ShockLabError(Exception):
    """Base class; ``stage`` labels the pipeline step that failed."""

    stage = "unknown"


class InvalidParameterError(ShockLabError, ValueError):
    stage = "input"


class EntropyViolationError(InvalidParameterError):
    stage = "shock"


class ModelInconsistencyError(ShockLabError):
    stage = "profile"


class IntegrationError(ShockLabError):
    stage = "profile"


class BlowUpError(ShockLabError):
    stage = "solver"


class NoConvergenceError(ShockLabError):
    stage = "periodic"


class ShiftSolveError(ShockLabError):
    stage = "shifts"


class AmplitudeTooLargeError(ShiftSolveError):
    pass


class DegenerateDenominatorError(ShiftSolveError):
    pass


class ConfigError(ShockLabError, ValueError):
    """Aggregates every schema violation found while loading a config."""

    stage = "config"

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
