"""Package initialization file."""

__version__ = "1.0.0"
__author__ = "Periodic Rigidity Lab"
__description__ = "Periodic-data rigidity laboratory for linear cocycles over hyperbolic systems"
