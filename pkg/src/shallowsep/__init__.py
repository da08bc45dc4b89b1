"""Exact laboratory for shallow-circuit sampling separations."""

__version__ = "0.1.0"
