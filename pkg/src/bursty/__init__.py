"""Burstiness tests and a two-state hidden Markov model for event series."""

__version__ = "0.1.0"
