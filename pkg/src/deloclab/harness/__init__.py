"""Seeded Monte Carlo experiment harness."""
