"""Semantics-empowered two-user uplink NOMA: rate regions and ergodic resource management."""

__version__ = "0.1.0"
