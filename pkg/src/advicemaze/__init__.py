"""Maze navigation testbed for advice-driven deep Q-learning under aliasing."""

__version__ = "0.1.0"
