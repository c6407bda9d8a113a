"""Simulation and verification of hybrid mechanical systems with abelian symmetry."""
