"""Spike-synchrony-dependent plasticity for spiking networks."""

__version__ = "0.1.0"
