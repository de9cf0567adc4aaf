"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration: bad dimensions, out-of-range values, unknown keys."""


class DataError(ValueError):
    """Dataset inconsistency: missing scenes, mismatched channel counts."""


class CheckpointError(RuntimeError):
    """Unreadable or incompatible checkpoint file."""


class TrainingDiverged(RuntimeError):
    """Non-finite error or gradient during training.

    Carries the epoch index and the parameter block that first went
    non-finite, when known.
    """

    def __init__(self, message: str, epoch: int):
        super().__init__(message)
        self.epoch = epoch
