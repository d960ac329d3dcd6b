"""Semi-supervised entanglement classification of quantum states."""

__version__ = "0.1.0"
