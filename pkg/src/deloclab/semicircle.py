"""Semicircle density, its distribution function and Stieltjes transform.

All functions accept scalars or numpy arrays and broadcast.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "rho_sc",
    "cdf_sc",
    "m_sc",
    "classical_locations",
    "extended_location",
    "msc_constant",
    "C_SC",
]

# Certified by a grid scan with msc_constant(); see tests/test_semicircle.py.
# Scan over E in [-20, 20], eta in [1e-10, 10] gives 0.01063 (min at |E| = 20, eta = 10).
C_SC = 0.01


def rho_sc(E):
    """Semicircle density sqrt((4 - E^2)_+) / (2 pi)."""
    E = np.asarray(E, dtype=float)
    return np.sqrt(np.clip(4.0 - E * E, 0.0, None)) / (2.0 * np.pi)


def cdf_sc(E):
    """Mass of the semicircle law on (-inf, E], in closed form."""
    E = np.clip(np.asarray(E, dtype=float), -2.0, 2.0)
    return np.clip(
        0.5 + E * np.sqrt(4.0 - E * E) / (4.0 * np.pi) + np.arcsin(E / 2.0) / np.pi,
        0.0,
        1.0,
    )


def m_sc(z):
    """Stieltjes transform of the semicircle law on the upper half plane.

    Returns the root of ``m**2 + z*m + 1 = 0`` with positive imaginary part.
    """
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag <= 0):
        raise ValueError("m_sc requires Im z > 0")
    s = np.sqrt(z * z - 4.0 + 0j)
    m1 = (-z + s) / 2.0
    m2 = (-z - s) / 2.0
    return np.where(m1.imag > 0, m1, m2)


def classical_locations(N: int, iterations: int = 200) -> np.ndarray:
    """Quantiles gamma_1 < ... < gamma_N with cdf_sc(gamma_i) = i/N.

    Entry ``i - 1`` of the returned array is gamma_i. Solved by bisection.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    target = np.arange(1, N + 1) / N
    lo = np.full(N, -2.0)
    hi = np.full(N, 2.0)
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        below = cdf_sc(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    gamma = 0.5 * (lo + hi)
    gamma[-1] = 2.0
    return gamma


def extended_location(m: int, gamma: np.ndarray) -> float:
    """gamma_m for any integer m, extending past [1, N] with spacing N^(-2/3)."""
    N = len(gamma)
    if m < 1:
        return float(gamma[0] - (1 - m) * N ** (-2.0 / 3.0))
    if m > N:
        return float(gamma[-1] + (m - N) * N ** (-2.0 / 3.0))
    return float(gamma[m - 1])


def _msc_scale(E, eta):
    d = np.abs(np.abs(E) - 2.0) + eta
    inside = np.abs(E) <= 2.0
    return np.where(inside, np.sqrt(d), eta / np.sqrt(d))


def msc_constant(E, eta) -> float:
    """Largest c with c*s <= Im m_sc <= s/c over the grid, s the comparison scale.

    The scale is sqrt(||E| - 2| + eta) inside [-2, 2] and eta / sqrt(||E| - 2| + eta)
    outside.
    """
    EE, HH = np.meshgrid(np.asarray(E, float), np.asarray(eta, float), indexing="ij")
    im = m_sc(EE + 1j * HH).imag
    s = _msc_scale(EE, HH)
    ratio = im / s
    return float(min(ratio.min(), (1.0 / ratio).min()))
