"""chainbound: certified bounds for Markov reward processes whose
parameters are produced by embedded machine-learning models."""

__version__ = "0.1.0"
