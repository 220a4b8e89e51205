"""Simulator for in-network performance attacks and the monitors meant to catch them."""

__version__ = "0.1.0"
