"""Simulation and numerical verification of Lévy processes, Lévy fields and their white noises."""

__version__ = "0.1.0"
