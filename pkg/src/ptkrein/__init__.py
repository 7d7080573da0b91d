"""Krein signatures and instability bifurcations of nonlinear modes in
PT-symmetric nonlinear Schroedinger equations."""

__version__ = "0.1.0"
