"""Shared exception types."""


class ConfigAdaptError(Exception):
    """Base class for all workbench errors."""


class ShapeMismatch(ConfigAdaptError):
    """Operands have incompatible shapes."""


class NumericError(ConfigAdaptError):
    """A computation produced NaN or Inf."""


class PlacementExhausted(ConfigAdaptError):
    """Scene rejection sampling ran out of attempts."""


class IoFailure(ConfigAdaptError):
    """A dataset or report could not be written."""


class DatasetMissing(ConfigAdaptError):
    """A referenced dataset directory does not exist or is malformed."""


class CheckpointMissing(ConfigAdaptError):
    """A referenced checkpoint file does not exist or is malformed."""


class FrameMismatch(ConfigAdaptError):
    """Detection frame ids are not a subset of ground-truth frame ids."""


class SchemaError(ConfigAdaptError):
    """A CSV or JSON input is missing required fields."""
