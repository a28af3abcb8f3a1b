"""Heralded two-mode mechanical cat states: generation, verification, criteria."""

__version__ = "0.1.0"
