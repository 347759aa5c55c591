"""Evacuation planning under behavior models on capacitated building graphs."""

__version__ = "0.1.0"
