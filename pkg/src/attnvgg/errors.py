"""Exception types shared across the library."""


class ShapeError(ValueError):
    """Tensor shapes violate an operation's contract."""


class DataError(ValueError):
    """Malformed dataset input (PGM file, label list, split request)."""


class WeightFileError(ValueError):
    """Malformed weight file, or one that does not match the model."""


class TrainingError(RuntimeError):
    """A training or backward pass cannot continue."""


class ConfigError(ValueError):
    """Invalid experiment configuration."""
