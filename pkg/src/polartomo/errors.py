"""Exception hierarchy shared by all modules.

CLI exit codes are attached to the classes so the front-end can map an
exception to a process status without a lookup table.
"""


class TomographyError(Exception):
    exit_code = 1


class DomainError(TomographyError, ValueError):
    """Input outside the domain of an operation (bad n, non-unitary gate, ...)."""

    exit_code = 2


class SchemaError(TomographyError, ValueError):
    """Malformed input file; ``field`` names the offending entry."""

    exit_code = 2

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class DisconnectedGraphError(TomographyError):
    """Estimation graph splits into several components carrying weight."""

    exit_code = 3

    def __init__(self, message, components=()):
        super().__init__(message)
        self.components = [sorted(int(v) for v in c) for c in components]


class NoChainError(TomographyError):
    """No simple path with the requested number of nodes exists."""

    exit_code = 3


class SizeCapError(TomographyError):
    exit_code = 4


class ConventionError(TomographyError):
    """No candidate gate convention satisfies the required invariant."""
