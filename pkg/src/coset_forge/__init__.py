"""coset-forge: symbolic plus numerical verification of hbar-deformed coset
vertex operators, their Gamma-function exchange structure, and the rational
current relations they generate."""

__version__ = "0.1.0"
