"""Numerical laboratory for periodically perturbed viscous shocks."""
