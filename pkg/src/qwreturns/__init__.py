"""Discrete-time quantum walk fits of long-horizon return distributions."""

__version__ = "0.1.0"
