"""Ingestion, serialization, streaming and synthetic-data generation."""


class InputError(Exception):
    """Malformed or inconsistent input data (schema violation, bad file)."""
