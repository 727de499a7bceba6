"""Metapopulation simulator for coupled disease and awareness spreading."""

__version__ = "0.1.0"
