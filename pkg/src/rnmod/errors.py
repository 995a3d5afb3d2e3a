"""Exception types raised by the toolkit."""


class RNModError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(RNModError, ValueError):
    """Operands live on different atom sets or fiber dimensions."""


class DomainError(RNModError, ValueError):
    """An argument is outside the domain of an operation."""


class PartitionError(RNModError, ValueError):
    """Pieces overlap or fail to cover the atom set."""

    def __init__(self, message, atom=None):
        super().__init__(message)
        self.atom = atom


class PreconditionError(RNModError, ValueError):
    pass


class UnsupportedCombinationError(RNModError, NotImplementedError):
    pass


class NonConvergenceError(RNModError, ValueError):
    """The certificate sequence does not settle at 1 by the horizon."""

    def __init__(self, message, atom=None):
        super().__init__(message)
        self.atom = atom


class SigmaStabilityError(RNModError):
    """A map gave different outputs for inputs that agree on a piece."""


class GeneratorError(RNModError):
    """A hypothesis generator failed its own certificate."""


class ConfigError(RNModError, ValueError):
    pass
