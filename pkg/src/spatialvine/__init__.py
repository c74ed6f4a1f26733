"""Spatial vine copula models for station temperature series."""
