"""Toolkit and gateway for schema.org Action annotated Web APIs."""

__version__ = "0.1.0"
