"""Peptide lead optimization: position routing and evolving policy-gradient search."""

__version__ = "0.1.0"
