"""Simulator for single-copy quantum privacy amplification with hyperentangled photons."""

__version__ = "0.1.0"
