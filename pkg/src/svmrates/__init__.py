"""Gaussian-kernel hinge-loss SVMs and numerical checks of their learning-rate theory."""

__version__ = "0.1.0"
