"""Intraday ingestion, realized variance and the daily panel."""
