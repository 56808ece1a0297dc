"""Vine robot deployment simulation, tip-sensor reconstruction and Monte Carlo mapping."""

__version__ = "0.1.0"
