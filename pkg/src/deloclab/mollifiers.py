"""Smooth cutoff functions built from the quintic smoothstep.

``smoothstep(t) = t^3 (10 - 15 t + 6 t^2)`` on [0, 1], clamped to 0 / 1 outside.
It is C^2 with bounded derivatives up to order 5 (the fifth derivative is the
constant 720 on (0, 1)). Every cutoff below is an affine reparametrization of
it, so plateaus and supports are exact.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "smoothstep",
    "ramp",
    "r_n",
    "f_E",
    "chi_cut",
    "q_window",
    "r_k",
    "f_eps",
]

# coefficients of S(t) = 10 t^3 - 15 t^4 + 6 t^5, lowest power first
_S = np.polynomial.Polynomial([0, 0, 0, 10, -15, 6])
_DERIVS = [_S] + [_S.deriv(k) for k in range(1, 6)]


def smoothstep(t, deriv: int = 0):
    """Quintic smoothstep or its derivative of order ``deriv`` (0..5)."""
    t = np.asarray(t, dtype=float)
    if deriv == 0:
        return np.where(t <= 0, 0.0, np.where(t >= 1, 1.0, np.clip(_DERIVS[0](np.clip(t, 0, 1)), 0.0, 1.0)))
    if deriv > 5:
        return np.zeros_like(t)
    inside = (t > 0) & (t < 1)
    return np.where(inside, _DERIVS[deriv](np.clip(t, 0, 1)), 0.0)


def ramp(x, a: float, b: float, deriv: int = 0):
    """Increasing ramp: 0 for x <= a, 1 for x >= b."""
    w = b - a
    return smoothstep((np.asarray(x, dtype=float) - a) / w, deriv) / w**deriv


def r_n(x, n: float, deriv: int = 0):
    """1 for x <= n - 1, 0 for x >= n - 1/2."""
    if deriv == 0:
        return 1.0 - ramp(x, n - 1.0, n - 0.5)
    return -ramp(x, n - 1.0, n - 0.5, deriv)


def f_E(x, E: float, eta1: float, deriv: int = 0):
    """1 on [-10, E]; 0 for x >= E + eta1 and for x <= -11."""
    if deriv == 0:
        return ramp(x, -11.0, -10.0) - ramp(x, E, E + eta1)
    return ramp(x, -11.0, -10.0, deriv) - ramp(x, E, E + eta1, deriv)


def chi_cut(sigma, deriv: int = 0):
    """Even cutoff: 1 for |sigma| <= 1, 0 for |sigma| >= 2."""
    s = np.asarray(sigma, dtype=float)
    if deriv == 0:
        return 1.0 - ramp(np.abs(s), 1.0, 2.0)
    return -ramp(np.abs(s), 1.0, 2.0, deriv) * np.sign(s) ** deriv


def q_window(x, center: float, w: float, deriv: int = 0):
    """1 on [center - 1.5 w, center + 1.5 w], 0 outside [center - 2 w, center + 2 w]."""
    u = np.asarray(x, dtype=float) - center
    if deriv == 0:
        return 1.0 - ramp(np.abs(u), 1.5 * w, 2.0 * w)
    return -ramp(np.abs(u), 1.5 * w, 2.0 * w, deriv) * np.sign(u) ** deriv


def r_k(x, k: float, deriv: int = 0):
    """1 for x <= k - 1, 0 for x >= k."""
    if deriv == 0:
        return 1.0 - ramp(x, k - 1.0, k)
    return -ramp(x, k - 1.0, k, deriv)


def f_eps(x, eps: float, N: int, deriv: int = 0):
    """Weakly increasing: 0 below (2 + eps) log N, 1 above (2 + 2 eps) log N."""
    L = np.log(N)
    return ramp(x, (2 + eps) * L, (2 + 2 * eps) * L, deriv)
