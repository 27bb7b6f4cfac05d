"""Exception types shared across the package."""


class StirlabError(Exception):
    """Base class for all stirlab errors."""


class ParameterError(StirlabError, ValueError):
    """An argument is outside its documented domain."""


class GenerationError(StirlabError, RuntimeError):
    """Trajectory generation exhausted its rejection-sampling budget."""


class InitializationError(StirlabError, RuntimeError):
    """A scene template cell cannot fit the requested pest arrangement."""


class ContractViolationError(StirlabError, ValueError):
    """A caller handed in values that break a stated precondition."""


class FitError(StirlabError, ValueError):
    """Least-squares fitting failed (too few rows or a rank-deficient design)."""


class CoefficientFileError(StirlabError, ValueError):
    """A coefficient file is malformed, truncated, or of the wrong version."""


class InsufficientHistoryError(StirlabError, ValueError):
    """Fewer confidence values than the evaluation window requires."""


class StateError(StirlabError, RuntimeError):
    """An operation was called on a controller in the wrong lifecycle state."""


class ConfigError(StirlabError, ValueError):
    """A config file is missing, unparseable, or contains unknown keys."""
