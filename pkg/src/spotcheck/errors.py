"""Exception types shared across the package.

Two broad families matter to the CLI: validation failures (bad inputs,
bad configs, constraint violations) exit with code 2, numerical failures
(divergence, non-finite losses) exit with code 3.
"""


class SpotcheckError(Exception):
    """Base class for all package errors."""


class ValidationError(SpotcheckError):
    """Input, config, or constraint violations. CLI exit code 2."""


class VocabularyError(ValidationError):
    """A layer/attribute/value combination is not part of the vocabulary."""


class ConfigError(ValidationError):
    """A config file or CLI argument set is inconsistent or incomplete."""


class ImportFormatError(ValidationError):
    """An external results file does not match the documented format."""


class SamplingError(ValidationError):
    """A sampler could not produce a valid object within its retry budget."""


class PlacementFailure(SamplingError):
    """No non-overlapping object layout found within the attempt budget."""


class InfeasibleSpec(SamplingError):
    """The requested blindspot size exceeds the dataset's attribute budget."""


class GenerationExhausted(SamplingError):
    """Constrained set sampling ran out of retries."""


class GeometryError(ValidationError):
    """A placement does not fit inside the image frame."""


class UnverifiedEC(ValidationError):
    """An experiment configuration failed (or is missing) induction checks."""


class EmptyHypothesis(ValidationError):
    """A hypothesized blindspot with zero images cannot be scored."""


class EmptyTruth(ValidationError):
    """A true blindspot with zero images cannot be scored."""


class DimensionMismatch(ValidationError):
    """Matrix/vector shapes passed to a numeric operation do not line up."""


class NumericsError(SpotcheckError):
    """Numerical failures during optimization. CLI exit code 3."""


class DivergenceError(NumericsError):
    """Training loss became non-finite."""


class NumericalError(NumericsError):
    """An optimization produced a non-finite objective."""


class DegenerateInput(NumericsError):
    """Input data admits no meaningful fit (e.g. all rows identical)."""
