"""Underwater image formation model."""
