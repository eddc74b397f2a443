"""Verification of noninterference for systems with state-dependent security policies."""

__version__ = "0.1.0"
