"""Computational laboratory for collapsing Kahler-Einstein metrics on toroidal
degenerations: real Monge-Ampere solutions on simplices, semi-flat metrics,
tropical amoebas and dual intersection complexes."""

__version__ = "0.1.0"
