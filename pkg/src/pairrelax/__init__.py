"""Convex relaxation, recovery and certification of pairwise interaction energies on periodic domains."""
