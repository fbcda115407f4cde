"""Forecaster families: HAR, penalized regression, PCA factors and combinations."""
