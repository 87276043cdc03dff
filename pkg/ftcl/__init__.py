"""ftcl - verification toolkit for mod-3 congruences of twisted L-values over Q(mu_3, m^(1/3))."""

__version__ = "0.1.0"
