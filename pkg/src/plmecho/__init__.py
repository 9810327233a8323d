"""Photon-echo quantum memory on a pre-created macroscopic spin coherence."""

__version__ = "0.1.0"
