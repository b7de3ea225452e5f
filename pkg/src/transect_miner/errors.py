"""Exception hierarchy shared by all pipeline stages."""


class TransectMinerError(Exception):
    """Base class for every error raised by this package."""


class FormatError(TransectMinerError):
    """Input file layout is not what the parser expects."""


class CellError(FormatError):
    """A single cell could not be parsed."""

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class InsufficientDataError(TransectMinerError):
    pass


class GeometryError(TransectMinerError):
    pass


class DomainError(TransectMinerError):
    """Argument outside the mathematical domain of an operation."""


class FitError(TransectMinerError):
    pass


class SelectionError(TransectMinerError):
    pass


class CoverageError(TransectMinerError):
    pass


class ConfigError(TransectMinerError):
    pass
