"""Kernel-split Nystrom / RCIP solver for 2D time-harmonic elastic scattering."""

__version__ = "0.1.0"
