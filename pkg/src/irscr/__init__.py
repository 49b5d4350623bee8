"""Robust joint precoding and IRS phase-shift optimization for CR downlinks."""

__version__ = "0.1.0"
