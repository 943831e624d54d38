"""Exception hierarchy shared by all solvers."""


class TwpaError(Exception):
    """Base class for every error raised by the package."""


class BiasOutOfRange(TwpaError, ValueError):
    pass


class HystereticRegime(TwpaError, ValueError):
    pass


class DegenerateSnail(TwpaError, ValueError):
    pass


class NoRoot(TwpaError, RuntimeError):
    pass


class BandUnavailable(TwpaError, ValueError):
    pass


class InGap(TwpaError, ValueError):
    pass


class AboveCutoff(TwpaError, ValueError):
    pass


class NoSweetSpot(TwpaError, RuntimeError):
    pass


class NoConvergence(TwpaError, RuntimeError):
    pass


class StepFailure(TwpaError, RuntimeError):
    pass


class NoSolution(TwpaError, RuntimeError):
    pass


class InstabilityDetected(TwpaError, RuntimeError):
    pass


class ParseError(TwpaError, ValueError):
    pass


class NonMonotonicFrequency(TwpaError, ValueError):
    pass


class InsufficientData(TwpaError, ValueError):
    pass


class ConfigError(TwpaError, ValueError):
    pass


class HarmonicAboveCutoff(UserWarning):
    """Warning: some pump harmonics do not propagate and were dropped."""
