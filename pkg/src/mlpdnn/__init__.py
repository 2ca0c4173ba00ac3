"""Multilevel Picard estimators for gradient-dependent semilinear heat equations
and their compilation into explicit ReLU networks."""

__version__ = "0.1.0"
