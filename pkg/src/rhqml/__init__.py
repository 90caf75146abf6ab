"""Residual hybrid quantum-classical learning workbench."""

__version__ = "0.1.0"
