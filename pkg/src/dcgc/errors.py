"""Exception types shared across the package.

Dimension/precondition misuse raises plain ValueError; these classes cover
the conditions the CLI maps to distinct exit codes.
"""


class DcgcError(Exception):
    pass


class ConfigError(DcgcError):
    """Invalid run configuration (bad hyperparameter, malformed config file)."""


class DataError(DcgcError):
    """Unparseable or inconsistent input data; message carries file:line."""


class NumericError(DcgcError):
    """Non-finite value or a violated numeric guard during computation."""
