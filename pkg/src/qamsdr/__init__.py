"""Semidefinite relaxation MIMO detectors for 4^q-QAM and their equivalence maps."""

__version__ = "0.1.0"
