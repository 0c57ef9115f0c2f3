"""Simulator for self-error-rejecting photonic transmission over collective-noise channels."""

__version__ = "0.1.0"
