"""Lexicographic ranking supermartingale synthesis and checking for probabilistic programs."""
__version__ = "0.1.0"
