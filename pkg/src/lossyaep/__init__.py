"""Lossy asymptotic equipartition for colored random graphs: samplers, kernels, rates and oracles."""

__version__ = "0.1.0"
