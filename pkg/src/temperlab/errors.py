"""Exception types shared across the package."""


class TemperlabError(Exception):
    pass


class NonFiniteValueError(TemperlabError, ValueError):
    """A density, potential, or gradient evaluated to NaN/inf on given input."""


class UnsupportedNormalizerError(TemperlabError, ValueError):
    """Normalized density requested for a potential without an analytic normalizer."""


class InvalidChainError(TemperlabError, ValueError):
    """Transition matrix fails stochasticity or reversibility checks."""


class InvalidPartitionError(TemperlabError, ValueError):
    """State partition has an empty block or out-of-range labels."""


class InvalidProposalError(TemperlabError, ValueError):
    """Proposal matrix lacks symmetric support."""


class SizeLimitError(TemperlabError, ValueError):
    """Exact subset enumeration requested beyond the hard state-count cap."""


class InsufficientSamplesError(TemperlabError, ValueError):
    """Fewer samples than the estimator's floor."""


class InvalidArgumentError(TemperlabError, ValueError):
    pass


class NumericsError(TemperlabError, RuntimeError):
    """A numerical routine failed to reach its requested tolerance."""
