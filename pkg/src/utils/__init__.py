"""Utility functions for validation, formatting and byte layouts."""
from .formatters import DataFormatter

__all__ = ['DataFormatter']
