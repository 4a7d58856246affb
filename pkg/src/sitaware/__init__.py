"""Situation-awareness toolkit: multi-source report fusion, min-max
preprocessing, small feed-forward regression networks trained by
resilient propagation, stepwise architecture selection and a linear
situation score."""

__version__ = "0.1.0"
