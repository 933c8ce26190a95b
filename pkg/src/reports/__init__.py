"""Report generation module."""
from .report_generator import BenchReportGenerator

__all__ = ['BenchReportGenerator']
