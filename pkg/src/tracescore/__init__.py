"""Scoring, verification, and desk-scale RL simulation for cell-cited table reasoning traces."""

__version__ = "0.1.0"
