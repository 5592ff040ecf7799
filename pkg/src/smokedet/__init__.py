"""Block-based video smoke detection with texture and space-time verification."""

from .errors import (ContractError, FormatError, InsufficientDataError, InvalidConfigError,
                     SmokeDetError, UnsupportedKernelError)

__version__ = "0.1.0"

__all__ = [
    "ContractError", "FormatError", "InsufficientDataError", "InvalidConfigError",
    "SmokeDetError", "UnsupportedKernelError", "__version__",
]
