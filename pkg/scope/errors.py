from __future__ import annotations


class ScopeError(Exception):
    """Base class for every data/configuration error raised by scope."""


class CorpusFormatError(ScopeError, ValueError):
    def __init__(self, message: str, *, path: str | None = None, line: int | None = None) -> None:
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)
        self.path = path
        self.line = line


class DatabaseError(ScopeError):
    pass


class DatabaseSchemaError(DatabaseError):
    def __init__(self, table: str, missing: list[str] | None = None) -> None:
        if missing:
            msg = f"table {table!r} is missing columns: {', '.join(missing)}"
        else:
            msg = f"table {table!r} not found"
        super().__init__(msg)
        self.table = table
        self.missing = list(missing or [])


class DatasetError(ScopeError, ValueError):
    pass


class FingerprintError(ScopeError, ValueError):
    pass


class ConfigError(ScopeError, ValueError):
    pass
