"""Blocked realized-kernel and QMLE estimation of integrated volatility."""

__version__ = "0.1.0"
