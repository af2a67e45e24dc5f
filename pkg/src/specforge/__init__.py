"""ACSL specification synthesis harness for C programs."""

__version__ = "0.1.0"
