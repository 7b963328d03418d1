"""Tangle machines: quandle-coloured diagrams as a model of computation."""

__version__ = "0.1.0"
