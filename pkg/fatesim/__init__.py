"""
fatesim: finite-state app models, an exploration environment over them,
reinforcement-learning agents and the statistics to compare them.
"""

__version__ = "1.0.0"
