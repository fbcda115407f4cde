"""Realized-variance forecasting and straddle backtests."""

__version__ = "0.1.0"
