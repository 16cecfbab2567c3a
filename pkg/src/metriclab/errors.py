"""Exception types raised across the package.

Everything derives from MetricLabError so callers can catch the whole
family; the CLI maps these onto its exit-status contract.
"""


class MetricLabError(Exception):
    """Base class for all metriclab errors."""


class DegenerateVector(MetricLabError):
    """A vector with (numerically) zero norm where a direction is required."""


class NonFiniteEvaluation(MetricLabError):
    """A probed function returned NaN/Inf during finite differencing."""


class DimensionMismatch(MetricLabError):
    """Array shapes are inconsistent with each other."""


class ShapeMismatch(DimensionMismatch):
    """Parameter/gradient/velocity shapes disagree in an optimizer step."""


class LabelOutOfRange(MetricLabError):
    """A class label falls outside [0, n)."""


class PartitionMismatch(MetricLabError):
    """An anchor partition is inconsistent with the batch it claims to cover."""


class EmptyPositiveSet(MetricLabError):
    """An anchor has no positive samples where at least one is required."""


class InvalidBatchShape(MetricLabError):
    """A batch does not have the P-classes-times-Q-samples structure."""


class InsufficientClasses(MetricLabError):
    """Fewer distinct labels available than the P requested."""


class InvalidQ(MetricLabError):
    """Samples-per-class Q below the minimum of 2."""


class InsufficientSamples(MetricLabError):
    """A class has too few rows for the requested query/gallery split."""


class NoRelevantItems(MetricLabError):
    """Average precision asked for a ranking with no relevant entries."""


class EmptyQuerySet(MetricLabError):
    """No evaluable queries remain."""


class NonFiniteLoss(MetricLabError):
    """Training produced a non-finite loss value, gradient, or parameter.

    Carries the step index at which the blow-up was detected.
    """

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class IoError(MetricLabError):
    """A file could not be read or written."""


class ParseError(MetricLabError):
    """A record in a dataset file could not be parsed; names the line."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class SchemaError(MetricLabError):
    """A dataset file does not match the expected column layout."""


class ConfigError(MetricLabError):
    """A run configuration is malformed (unknown key, bad value, bad type)."""
