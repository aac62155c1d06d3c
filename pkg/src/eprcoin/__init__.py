"""Simulation and adversarial analysis of lock/unlock EPR coin tossing."""

__version__ = "0.1.0"
