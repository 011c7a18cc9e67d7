"""Intrinsic circle domains via circle packing."""

__version__ = "0.1.0"
