"""Exception hierarchy shared by all compsync modules."""


class CompsyncError(Exception):
    """Base class for every error raised by this package."""


class InvalidMatrix(CompsyncError, ValueError):
    pass


class InvalidDimensions(CompsyncError, ValueError):
    pass


class NotSimultaneous(CompsyncError):
    """No common orthonormal basis diagonalizes the given matrices."""


class InvalidOrder(CompsyncError, ValueError):
    pass


class InvalidSpectrum(CompsyncError, ValueError):
    pass


class NotConnected(CompsyncError, ValueError):
    pass


class InfeasibleCollection(CompsyncError):
    """A collection violates the spectral constraints it is supposed to meet."""


class InvalidGain(CompsyncError, ValueError):
    pass


class InvalidAugmentation(CompsyncError, ValueError):
    pass


class NotControllable(CompsyncError, ValueError):
    pass


class InvalidAgent(CompsyncError, IndexError):
    pass


class SingularDecoupling(CompsyncError):
    """The input gain of an agent vanished, so the control cannot be applied."""

    def __init__(self, message, state=None, t=None, agent=None):
        super().__init__(message)
        self.state = state
        self.t = t
        self.agent = agent


class Diverged(CompsyncError):
    def __init__(self, message, t=None, agent=None):
        super().__init__(message)
        self.t = t
        self.agent = agent


class ConfigError(CompsyncError, ValueError):
    """Scenario or command configuration failed validation."""
