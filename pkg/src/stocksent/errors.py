"""Exception hierarchy shared across pipeline stages."""


class PipelineError(Exception):
    """Base class; ``exit_code`` is used by the CLI."""

    exit_code = 1


class InputError(PipelineError):
    exit_code = 2


class ParseError(InputError):
    def __init__(self, message: str, row: int | None = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class IntegrityError(InputError):
    pass


class InsufficientDataError(InputError):
    pass


class AlignmentError(InputError):
    pass


class PlanError(InputError):
    pass


class ProviderError(PipelineError):
    exit_code = 3


class AuthenticationError(ProviderError):
    pass


class NumericalError(PipelineError):
    exit_code = 4


class RankDeficiencyError(NumericalError):
    def __init__(self, columns: list[str]):
        self.columns = columns
        super().__init__(f"singular weighted normal system; offending columns: {', '.join(columns)}")


class ShapeError(NumericalError, ValueError):
    pass


class NotScorableError(ValueError):
    pass


class ConfigError(PipelineError):
    exit_code = 2
