"""Adiabatic decomposition of zeta determinants and eta invariants on circle models."""

__version__ = "0.1.0"
