"""Distributionally robust adaptive beamforming via LMI relaxations."""

__version__ = "0.1.0"
