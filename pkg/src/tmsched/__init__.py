"""Temporal multitask scheduling: recipes, simulator, solvers and metrics."""
__version__ = "0.1.0"
