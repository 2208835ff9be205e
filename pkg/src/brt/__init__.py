"""Bayes risk transducer: risk-weighted transducer losses and early-stop decoding."""

__version__ = "0.1.0"
