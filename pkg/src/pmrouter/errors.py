"""Exception hierarchy shared by all pmrouter modules."""


class RouterError(Exception):
    """Base class for every error raised by pmrouter."""


class DegenerateStateError(RouterError, ValueError):
    """A state or measurement record carries no usable signal (zero norm)."""


class PhysicalityError(RouterError, ValueError):
    """A matrix that must be Hermitian positive semidefinite is not."""


class ParameterError(RouterError, ValueError):
    """A physical model parameter is out of its allowed range."""


class NoSwitchingError(ParameterError):
    """The modulator has no electro-optic response, so no switching voltage exists."""


class ConfigError(RouterError, ValueError):
    """Configuration failed validation.

    ``errors`` holds every problem found, one human-readable string each.
    """

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class FormatError(RouterError, ValueError):
    """A dataset file is malformed or has an unsupported schema."""


class FitError(RouterError, RuntimeError):
    """A curve fit is unidentifiable from the supplied data."""


class AnalysisError(RouterError, RuntimeError):
    """A waveform or dataset analysis could not locate the requested feature."""


class RankDeficientError(RouterError, ValueError):
    """Tomographic inputs do not span the operator space."""


class ConvergenceError(RouterError, RuntimeError):
    """An iterative estimator stopped without meeting its tolerance.

    The last iterate and its gradient norm are kept for diagnostics.
    """

    def __init__(self, message, last_iterate=None, gradient_norm=None, iterations=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.gradient_norm = gradient_norm
        self.iterations = iterations
