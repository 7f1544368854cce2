"""Noncommutative domains: series calculus, operator models and invariants."""

__version__ = "0.1.0"
