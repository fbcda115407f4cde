"""Tests for the backtest package."""
