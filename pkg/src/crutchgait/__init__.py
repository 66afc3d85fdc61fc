"""Crutch-aware exoskeleton locomotion learning laboratory."""

__version__ = "0.1.0"
