"""Benchmark harness for summary-mediated program repair."""

__version__ = "0.1.0"
