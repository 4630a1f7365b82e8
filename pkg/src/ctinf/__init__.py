"""Continuous-time influence estimation and budgeted multi-product allocation."""

__version__ = "0.1.0"
