"""TaiJi consensus: protocol library, round-based simulator and analyzers."""

__version__ = "0.1.0"
