"""Nested ensemble transform Kalman filters for stochastic model-error
parameterizations, with a two-scale/truncated Lorenz-96 experiment harness."""

__version__ = "0.1.0"
