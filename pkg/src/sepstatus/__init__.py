"""Cluster separability, separation status and measurement models for identical particles."""

__version__ = "0.1.0"
