"""Functional data analysis of epidemic waves."""

__version__ = "0.1.0"
