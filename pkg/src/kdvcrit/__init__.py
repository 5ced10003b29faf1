"""Critical-length KdV toolkit: pair arithmetic, the s-condition, auxiliary
functions, quasi-periodic traces and finite-difference experiments."""

__version__ = "0.1.0"
