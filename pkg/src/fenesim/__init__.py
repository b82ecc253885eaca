"""Finite-level scheme for FENE-type dilute polymer flows with variable density."""

__version__ = "0.1.0"
