"""Multilevel vibration transfer path analysis for vehicle interiors."""

__version__ = "0.1.0"
