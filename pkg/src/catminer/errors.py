"""Shared exception hierarchy.

The CLI maps these onto exit codes: DataError -> 2, BackendError -> 3.
Module-specific exceptions subclass one of the two so new error types
inherit sensible CLI behaviour automatically.
"""


class WorkbenchError(Exception):
    """Base class for all catminer errors."""


class DataError(WorkbenchError):
    """Bad or inconsistent input data (fixtures, corpora, config files)."""


class BackendError(WorkbenchError):
    """Failure talking to an embedder or chat-completion backend."""
