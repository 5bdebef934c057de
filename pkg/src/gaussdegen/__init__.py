"""Varieties with degenerate Gauss maps: analysis, constructions and Cartan tests."""

__version__ = "0.1.0"
