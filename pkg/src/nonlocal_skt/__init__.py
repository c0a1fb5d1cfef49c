"""Finite volume solver for the nonlocal SKT cross-diffusion system."""
