"""Exception hierarchy shared by all modules."""


class BHWorkError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(BHWorkError, ValueError):
    """Invalid experiment configuration or invalid arguments."""


class ConvergenceError(BHWorkError):
    """The step-doubling loop ran out of refinements.

    ``drift`` holds the last measured conservation drift and ``change`` the
    last successive-refinement difference, so callers can see how far off
    the integration was.
    """

    def __init__(self, message, drift=float("nan"), change=float("nan"), steps=0):
        super().__init__(message)
        self.drift = drift
        self.change = change
        self.steps = steps


class ResourceLimitError(BHWorkError):
    """A basis or dense matrix exceeds its configured size cap."""
