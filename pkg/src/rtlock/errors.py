"""Exception types shared across the toolkit.

The CLI maps these onto its exit codes: usage problems exit 1, bad input
(unparseable files, broken tables, un-lockable designs) exits 2, anything
else is treated as an internal error and exits 3.
"""


class ToolError(Exception):
    """Base class for errors the toolkit raises on purpose."""

    kind = "internal"
    exit_code = 3


class UsageError(ToolError):
    """Malformed command-line arguments, spec strings, or config values."""

    kind = "usage"
    exit_code = 1


class InputError(ToolError):
    """Structurally invalid input: designs, keys, tables, or training data."""

    kind = "input"
    exit_code = 2


class ParseError(InputError):
    """Source text rejected by the frontend, with a 1-based position."""

    kind = "parse"

    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column

    def __str__(self):
        base = super().__str__()
        if self.line is None:
            return base
        return f"{self.line}:{self.column}: {base}"


class PairTableError(InputError):
    """Pair table rejected; carries the individual findings."""

    kind = "pair-table"

    def __init__(self, message, findings=()):
        super().__init__(message)
        self.findings = list(findings)


class LockError(InputError):
    """A locking algorithm cannot proceed on the given design."""

    kind = "lock"
