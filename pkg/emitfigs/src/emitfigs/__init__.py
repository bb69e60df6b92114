"""Static comparison figures for decentralized-learning sweeps.

Reads a sweep manifest plus per-run metrics CSVs and renders one panel per
(attack, agent-count) cell with one curve per algorithm.
"""

__version__ = "0.1.0"
