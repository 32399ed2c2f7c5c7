"""Transformer document-embedding export to the shared interchange format."""

__version__ = "0.1.0"
