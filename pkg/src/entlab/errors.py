"""Exception types shared across the package.

Each exception carries the process exit code the CLI maps it to, so the
command layer never needs a lookup table.
"""


class EntlabError(Exception):
    exit_code = 1


class ValidationError(EntlabError):
    """Malformed or out-of-contract input (bad dims, bad probabilities, ...)."""

    exit_code = 2


class DegenerateSpectrumError(ValidationError):
    """Spectrum with alpha = 0 where a spread is required (uniform or pure)."""

    exit_code = 2


class CapExceededError(EntlabError):
    """A configured size cap (class count, dense dimension) was exceeded."""

    exit_code = 3
