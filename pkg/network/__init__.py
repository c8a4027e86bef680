"""Dual-stream parameter estimation network."""
