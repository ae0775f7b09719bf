"""Spin-motion dynamics of a trapped ion under microwaves and an oscillating magnetic-field gradient."""

__version__ = "0.1.0"
