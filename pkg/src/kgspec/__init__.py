"""Spectral triples for finite higher-rank graph C*-algebras, at finite truncation."""

__version__ = "0.1.0"
