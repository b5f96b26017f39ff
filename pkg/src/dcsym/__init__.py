"""Lie symmetry verification for variable-coefficient diffusion-convection equations."""

__version__ = "0.1.0"
