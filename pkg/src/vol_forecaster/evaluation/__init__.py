"""Forecast losses, Mincer-Zarnowitz regressions and panel aggregation."""
