"""Exemplar-based reinforcement learning with analogical similarity and schema induction."""

__version__ = "0.1.0"
