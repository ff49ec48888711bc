"""Darboux-transformed Hamiltonians and explicit solutions for first-order systems."""
__version__ = "0.1.0"
