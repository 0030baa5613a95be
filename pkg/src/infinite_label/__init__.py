"""Infinite-label (zero-shot multi-label) learning with bilinear label codes."""

__version__ = "0.1.0"
