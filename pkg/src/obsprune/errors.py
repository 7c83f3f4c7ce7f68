"""Exception taxonomy shared by all modules.

The CLI maps these onto exit codes: file/format problems exit 3,
numerical failures exit 4, usage problems exit 2 (argparse level).
"""


class CompressionError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(CompressionError):
    """File bytes do not conform to the expected container format."""


class UnsupportedError(CompressionError):
    """Well-formed file using a feature we deliberately do not support
    (e.g. column-major order, non-float dtypes)."""


class ValidationError(CompressionError):
    """Structurally valid input violating a semantic invariant
    (non-finite values, broken dimension chain, bad configuration)."""


class WriteError(CompressionError):
    """I/O failure while persisting an artifact."""


class DegenerateInputError(CompressionError):
    """Calibration data carries no signal (e.g. all-zero inputs)."""


class SingularMatrixError(CompressionError):
    """A matrix that must be invertible for the requested operation is not."""


class FactorizationError(CompressionError):
    """Cholesky factorization failed; usually fixed by more dampening."""
