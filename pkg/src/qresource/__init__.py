"""Numerical toolkit for quantum resources under operational restrictions."""

__version__ = "0.1.0"
