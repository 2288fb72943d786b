"""Ledger-backed identities, certificateless mutual authentication and a simulated DU subnet."""

__version__ = "0.1.0"
