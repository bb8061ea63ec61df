"""Distributed BFS with compressed and sieved frontier exchange, simulated in-process."""

__version__ = "0.1.0"
