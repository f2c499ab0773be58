"""Exact computations with multiplicative measures on integer partitions."""

__version__ = "0.1.0"
