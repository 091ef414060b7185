"""Elastic MCTS: Monte Carlo Tree Search with elastic state abstraction for Kill The King."""

__version__ = "0.1.0"
