"""Exception types shared across the engine."""


class EngineError(Exception):
    """Base class for all engine errors."""


class InvalidUtteranceError(EngineError):
    """Utterance role/kind combination violates the dialogue model."""


class ParseError(EngineError):
    """A line-delimited input file is malformed."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class ValidationError(EngineError):
    """A parsed artifact violates a format invariant (e.g. rank gaps)."""


class DuplicateIdError(EngineError):
    """An identifier that must be unique was seen twice."""


class NotFoundError(EngineError):
    """A referenced passage or resource does not exist."""


class InvalidArgumentsError(EngineError):
    """Arguments violate an operation's precondition."""


class BackendUnavailableError(EngineError):
    """A remote backend could not be reached or answered malformed data."""


class ContractError(EngineError):
    """A caller violated an object contract (unfiltered pool, untrained model)."""


class EmptyPoolError(EngineError):
    """Question selection was asked to pick from an empty pool."""


class StateError(EngineError):
    """A session operation was issued in the wrong state."""


class StratificationError(EngineError):
    """Too few examples of some class to build stratified folds."""
