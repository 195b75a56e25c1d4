"""orderlab: corpus word-order choice modeling and evaluation toolkit."""

__version__ = "0.1.0"
