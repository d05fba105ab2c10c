"""Parallel piecewise phase/amplitude oracles, catalyst towers and their cost models."""

__version__ = "0.1.0"
