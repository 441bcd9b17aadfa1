"""Deterministic simulator of prefetcher side channels and the per-task
prefetch-disable defense."""

__version__ = "0.1.0"
