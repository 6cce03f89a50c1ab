"""Simulation and exact-oracle toolkit for critical Galton-Watson trees whose
offspring law lies in the domain of attraction of a Cauchy law."""

__version__ = "0.1.0"
