"""
Package: switchcast
Package for the switch distribution, its baselines and the experiments
built on them
"""

__version__ = "0.1.0"
