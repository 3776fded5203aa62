"""Exact p-adic building geometry, discrete harmonic maps and monodromy tools."""
