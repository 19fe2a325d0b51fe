class FocusedReadingError(Exception):
    pass


class ContractViolation(FocusedReadingError, ValueError):
    """A caller broke an operation's precondition."""


class ConfigurationError(FocusedReadingError, ValueError):
    pass


class DataError(FocusedReadingError, ValueError):
    """Input file is unreadable or malformed."""


class CorpusFormatError(DataError):
    def __init__(self, line_number, message):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


class DuplicateDocumentError(DataError):
    pass


class InvalidProblemError(DataError):
    pass


class ShortfallError(DataError):
    """Not enough eligible pairs to fill the requested splits."""

    def __init__(self, message, achievable):
        self.achievable = achievable
        super().__init__(message)


class DivergenceError(FocusedReadingError, RuntimeError):
    pass
