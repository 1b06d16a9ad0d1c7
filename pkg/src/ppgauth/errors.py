"""Exception hierarchy shared by every pipeline stage."""


class PPGAuthError(Exception):
    """Base class for all errors raised by ppgauth."""


class InvalidConfigError(PPGAuthError, ValueError):
    pass


class NumericInstabilityError(PPGAuthError, ArithmeticError):
    pass


class InsufficientSignalError(PPGAuthError, ValueError):
    pass


class SmallSampleSizeError(PPGAuthError, ValueError):
    """Within-class scatter is singular; use DLDA instead of plain LDA."""


class DegenerateTrainingError(PPGAuthError, ValueError):
    pass


class UndefinedCorrelationError(PPGAuthError, ValueError):
    pass


class UnknownIdentityError(PPGAuthError, KeyError):
    pass


class ContractViolationError(PPGAuthError, ValueError):
    pass


class ManifestError(PPGAuthError, ValueError):
    pass


class FingerprintMismatchError(PPGAuthError):
    """Model was enrolled under a different preprocessing/feature config."""
