"""Separated sum-of-exponentials heat kernels and an exterior heat-equation solver."""
__version__ = "0.1.0"
