"""Deterministic SINR network simulator with wakeup, broadcast and backbone protocols."""

__version__ = "0.1.0"
