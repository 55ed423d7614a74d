"""Phylogenetic character matrices from ASJP-style wordlists."""

__version__ = "0.1.0"
