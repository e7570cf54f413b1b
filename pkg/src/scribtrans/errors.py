"""Exception types raised by the pipeline.

Everything derives from ScribtransError so callers (and the CLI) can catch
pipeline failures without swallowing genuine bugs.
"""


class ScribtransError(Exception):
    pass


class MalformedMaskError(ScribtransError):
    """A mask file contains a pixel value that is neither a class nor ignore."""


class InfeasibleBudgetError(ScribtransError):
    """Scribble coverage budget too small to give each class one pixel."""


class EmptySupervisionError(ScribtransError):
    """A mask with no labeled pixels was used where supervision is required."""


class InsufficientDataError(ScribtransError):
    """A class has fewer examples than the requested per-class count."""


class InvalidSplitError(ScribtransError):
    """Cross-validation split request cannot be satisfied."""


class ConfigError(ScribtransError):
    """Bad experiment configuration (unknown key, type or stage mismatch)."""


class ScheduleError(ScribtransError):
    """Learning-rate schedule queried outside its domain."""


class DivergenceError(ScribtransError):
    """A non-finite gradient was encountered; the run is aborted."""


class TransferError(ScribtransError):
    """Backbone weight transfer failed (preset or shape mismatch)."""


class ContractError(ScribtransError):
    """An in-process API was called with arguments violating its contract."""
