"""Coherence of phonon-dressed, cavity-enhanced quantum-dot emission."""

__version__ = "0.1.0"
