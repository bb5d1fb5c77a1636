"""Popularity-calibrated re-ranking with multistakeholder evaluation."""

__version__ = "0.1.0"
