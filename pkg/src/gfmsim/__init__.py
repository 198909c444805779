"""Simulation benchmark for global versus local time series forecasting models."""

__version__ = "0.1.0"
