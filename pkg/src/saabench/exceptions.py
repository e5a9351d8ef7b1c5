"""Exception hierarchy shared by all saabench modules."""


class SaaBenchError(Exception):
    """Base class for every error raised by this package."""


class EmptySampleError(SaaBenchError, ValueError):
    pass


class UnsupportedDistributionError(SaaBenchError, TypeError):
    pass


class DegenerateBandwidthError(SaaBenchError, ValueError):
    """Scott's rule was asked for a bandwidth on a zero-variance sample."""


class EstimationError(SaaBenchError, RuntimeError):
    """A fitting routine (MLE, EM) failed to converge.

    The harness records these per replication and excludes the failing
    method from the paired comparison for that replication only.
    """


class SingularCovarianceError(SaaBenchError, ValueError):
    pass


class ConfigError(SaaBenchError, ValueError):
    """Raised with the full list of violations found in a config."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
