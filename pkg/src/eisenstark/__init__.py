"""Numerical verification of the Stark/Merel/Eisenstein ratio for the
weight-one forms attached to the cubic fields of discriminant -23 and -31."""

__version__ = "0.1.0"
