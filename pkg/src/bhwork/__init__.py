"""Work statistics for driven Bose-Hubbard chains: quantum vs. classical."""
__version__ = "0.1.0"
