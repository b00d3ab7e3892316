"""Exception hierarchy.  Every error raised on purpose derives from HosDetectError."""


class HosDetectError(Exception):
    """Base class; ``step`` names the pipeline stage that failed, when known."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step

    def __str__(self):
        msg = super().__str__()
        return f"[{self.step}] {msg}" if self.step else msg


class UnsupportedOrder(HosDetectError, ValueError):
    pass


class DomainError(HosDetectError, ValueError):
    pass


class OutOfRange(HosDetectError, ValueError):
    pass


class InsufficientData(HosDetectError, ValueError):
    pass


class ConfigError(HosDetectError, ValueError):
    pass


class NoDominantTone(HosDetectError):
    pass


class InconsistentEvidence(HosDetectError):
    pass


class NumericalDivergence(HosDetectError, ArithmeticError):
    pass


class NoLimitCycle(HosDetectError):
    pass


class RecordFormatError(HosDetectError, ValueError):
    pass
