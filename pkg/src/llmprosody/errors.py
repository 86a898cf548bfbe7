"""Shared exception hierarchy.

The three categories map onto the CLI exit codes: DataError -> 2,
LlmOutputError -> 3, BackendError -> 4.
"""


class LlmProsodyError(Exception):
    """Base class for every error raised by this package."""


class DataError(LlmProsodyError):
    """Malformed, inconsistent, or degenerate input data."""


class LlmOutputError(LlmProsodyError):
    """The model's output could not be turned into a usable suggestion."""


class BackendError(LlmProsodyError):
    """Transport-level failure while talking to a completion backend."""
