"""Turning-lane pavement-marking inventory from georeferenced aerial tiles."""

__version__ = "0.1.0"
