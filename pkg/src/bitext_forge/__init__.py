"""Selective revision of mined bitext with synthetic translations, plus corpus analysis."""

__version__ = "0.1.0"
