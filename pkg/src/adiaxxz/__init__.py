"""Adiabatic ground-state preparation of the XXZ ring: SA, auxiliary-field,
optimized-initial and counterdiabatic protocols."""

__version__ = "0.1.0"
