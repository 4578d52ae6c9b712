"""Samplers, spectral thresholds, cycle tests and exact oracles for planted
factor models and (hypergraph) stochastic block models."""

__version__ = "0.1.0"
