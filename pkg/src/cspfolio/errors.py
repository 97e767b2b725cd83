"""Shared error type for invalid or inconsistent data artifacts."""


class DataError(Exception):
    """Raised when a CSV/JSON artifact or an in-memory table violates its
    contract (missing cells, bad values, misaligned ids)."""
