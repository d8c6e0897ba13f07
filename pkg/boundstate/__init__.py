"""Exact non-Markovian dissipation and decoherence of a cavity coupled to a structured reservoir"""

# pylint: disable = invalid-name

__version__ = "0.2.0"
