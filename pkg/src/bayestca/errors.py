"""Exception hierarchy shared across the package.

``TCAError`` is the common base.  The CLI maps subtrees to exit codes:
``ConfigError`` -> 2, ``DivergentChain`` -> 4, any other ``TCAError`` -> 3.
"""


class TCAError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(TCAError):
    """Malformed or inconsistent configuration."""


class DataError(TCAError):
    """Input data violates a documented contract."""


# --- benchmark engine ---

class EmptyFills(DataError):
    """An execution record has no fills."""


class InvalidPrice(DataError):
    """A price that must be strictly positive is not."""


class NoTapeData(DataError):
    """No tape trades fall inside the required window."""


class BucketTooSmall(DataError):
    """A participation-rate bucket holds fewer than 3 complete orders."""


# --- distribution / model ---

class InvalidInput(TCAError, ValueError):
    """A numeric argument is outside its documented domain."""


class InvalidCovariate(InvalidInput):
    """A covariate is non-positive or non-finite."""


class ShapeMismatch(TCAError, ValueError):
    """Coefficient, prior, or covariate shapes do not line up."""


class InsufficientSamples(DataError):
    """Too few posterior draws to summarize (need >= 100)."""


# --- sampler ---

class DivergentChain(TCAError):
    """A chain rejected non-finite proposals for too many consecutive sweeps."""


# --- ranking ---

class DegenerateDistribution(DataError):
    """A covariance matrix is singular even after regularization."""


class CannotStandardize(DataError):
    """Fewer than 2 candidate algorithms; z-scores are undefined."""


class InsufficientHistory(DataError):
    """Too few observations to fit a historical profile."""
