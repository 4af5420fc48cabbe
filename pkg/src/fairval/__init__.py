"""Exact k-NN Shapley data valuation for group fairness: contribution
matrices, fairness valuations, training re-weighting and the experiment
loops around them."""

__version__ = "0.1.0"
