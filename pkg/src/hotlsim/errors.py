"""Exception hierarchy shared across the simulator."""


class HotlError(Exception):
    """Base class for all errors raised by this package."""


class EmptyCorpus(HotlError):
    pass


class SchemaMismatch(HotlError):
    pass


class InvalidFpr(HotlError):
    pass


class InvalidSigma(HotlError):
    pass


class DegenerateReplicas(HotlError):
    pass


class RuleDomainError(HotlError):
    pass


class IllegalTransition(HotlError):
    pass


class StaleAlert(HotlError):
    pass


class UnknownAlert(HotlError):
    pass


class ParseError(HotlError):
    pass


class ValidationError(HotlError):
    pass


class CorruptLog(HotlError):
    def __init__(self, message: str, line_number: int | None = None):
        super().__init__(message)
        self.line_number = line_number


class BindError(HotlError):
    pass
