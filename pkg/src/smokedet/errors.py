"""Exception types raised across the detector."""


class SmokeDetError(Exception):
    """Base class for all detector errors."""


class ContractError(SmokeDetError, ValueError):
    """An operation was called with arguments violating its precondition."""


class InvalidConfigError(SmokeDetError, ValueError):
    """A configuration value is out of range or inconsistent."""


class FormatError(SmokeDetError, ValueError):
    """An input file or stream is malformed or unsupported."""


class UnsupportedKernelError(SmokeDetError, LookupError):
    """A texture descriptor was requested that is not implemented."""

    def __init__(self, name):
        super().__init__(f"unsupported texture kernel: {name!r}")
        self.name = name


class InsufficientDataError(SmokeDetError):
    """Too few training samples were harvested to fit a model."""
