"""Optimal control of an atom-cavity-oscillator hybrid system."""
__version__ = '0.1.0'
