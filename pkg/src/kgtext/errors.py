"""Exception hierarchy shared across the package.

The CLI maps these onto distinct exit codes, so keep the split between
parse/schema problems and lookup problems intact.
"""


class KgError(Exception):
    """Base class for all kgtext errors."""


class ParseError(KgError):
    """A line of an input file failed to parse."""

    def __init__(self, path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


class SchemaError(KgError):
    """A record, snapshot, or cache file does not match the expected schema."""


class NotFoundError(KgError):
    """An entity or relation id is not known to the queried structure."""


class CatalogError(KgError):
    """Text catalog construction failed (missing mapping, unresolvable collision)."""


class BudgetError(KgError):
    """The task segment alone does not fit the token budget."""
