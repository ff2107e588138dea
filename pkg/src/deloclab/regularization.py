"""Regularized eigenvalues and eigenvector projections, and related observables.

The regularized eigenvalue of index i integrates a smoothed counting function
``r(F_E)`` over an energy window ``I = [gamma_j, gamma_k]``. ``F_E`` is the
Helffer-Sjostrand representation of ``Tr f_E`` with the small-``sigma`` term
dropped. Because every term is linear in the spectral measure, ``F_E`` is a sum
over eigenvalues of an explicit kernel. The default ``method="spectral"``
evaluates that kernel by Gauss-Legendre quadrature in one dimension. The
``"quadrature"`` method evaluates the three two-dimensional integrals directly
and is used to validate the spectral route.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb

import numpy as np
from scipy.special import logsumexp

from . import mollifiers as mol
from .linalg import Spectrum, eigh
from .semicircle import classical_locations, extended_location, m_sc

__all__ = [
    "RegParams",
    "QuadratureError",
    "hat",
    "HsWindow",
    "hs_window",
    "counting_function",
    "hs_F",
    "hs_F_quadrature",
    "hs_regularized_eigenvalue",
    "regularized_eigenvalues",
    "adaptive_simpson",
    "regularized_projection",
    "TValue",
    "observable_T",
    "free_energy",
    "smoothed_threshold_S",
    "S_statistic",
    "EventReport",
    "event_check",
    "sandwich_slacks",
    "finite_diff",
    "audit_json",
]


class QuadratureError(RuntimeError):
    """Successive quadrature refinements disagree beyond tolerance."""


@dataclass(frozen=True)
class RegParams:
    delta1: float
    eps1: float
    delta2: float
    eps2: float
    omega: float
    nu: float
    k: int = 1
    beta: float | None = None

    def __post_init__(self):
        for name in ("delta1", "eps1", "delta2", "eps2", "omega", "nu"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.delta1 > self.eps1:
            raise ValueError("need delta1 > eps1")
        if not self.eps2 > self.delta2:
            raise ValueError("need eps2 > delta2")
        if self.k < 1:
            raise ValueError("k must be >= 1")

    @classmethod
    def hierarchy(cls, delta1: float, k: int = 1, beta: float | None = None, **over) -> "RegParams":
        """Default ratios eps2 = d/1e2, delta2 = d/1e3, eps1 = d/1e4, nu = omega = d/1e5."""
        base = dict(
            delta1=delta1,
            eps1=delta1 / 1e4,
            delta2=delta1 / 1e3,
            eps2=delta1 / 1e2,
            omega=delta1 / 1e5,
            nu=delta1 / 1e5,
            k=k,
            beta=beta,
        )
        base.update(over)
        return cls(**base)

    def beta_for(self, N: int) -> float:
        return self.beta if self.beta is not None else float(N) ** self.delta1


def hat(i: int, N: int) -> int:
    return min(i, N + 1 - i)


def _as_lam(X) -> np.ndarray:
    if isinstance(X, Spectrum):
        return X.lam
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        return np.linalg.eigvalsh(X)
    return np.sort(X)


def _as_spectrum(X) -> Spectrum:
    return X if isinstance(X, Spectrum) else eigh(np.asarray(X, dtype=float))


@lru_cache(maxsize=None)
def _gl(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


@lru_cache(maxsize=64)
def _gamma(N: int) -> np.ndarray:
    return classical_locations(N)


# ---------------------------------------------------------------------------
# Counting function and the Helffer-Sjostrand kernel


def counting_function(X, E: float) -> int:
    """#{k : lambda_k in [-10, E]}."""
    if E < -10:
        raise ValueError("counting function defined for E >= -10")
    lam = _as_lam(X)
    return int(np.searchsorted(lam, E, side="right") - np.searchsorted(lam, -10.0, side="left"))


@dataclass(frozen=True)
class HsWindow:
    i: int
    j: int
    k: int
    lo: float
    hi: float
    eta1: float


def hs_window(N: int, i: int, delta: float, eps: float) -> HsWindow:
    """Quantile window and smoothing scale for index i (1-based).

    ``delta`` and ``eps`` are the exponents of the closeness bound; internally
    the window offset uses eps/3 and the smoothing scale uses delta.
    """
    if not 1 <= i <= N:
        raise ValueError(f"index {i} outside 1..{N}")
    eps_a = eps / 3.0
    off = math.ceil(1.5 * N**eps_a)
    j, k = i - off, i + off
    g = _gamma(N)
    eta1 = N ** (-2.0 / 3.0 - delta) * hat(i, N) ** (-1.0 / 3.0)
    return HsWindow(i, j, k, extended_location(j, g), extended_location(k, g), eta1)


def _h(u):
    a = np.abs(u)
    return a * np.arctan2(1.0, a)


_S2 = np.polynomial.Polynomial([0, 0, 0, 10, -15, 6]).deriv(2)


def _series_coeffs(P: int = 3, M: int = 8):
    # mu_m = int_0^1 S''(t) t^m dt
    mu = []
    for m in range(M + 1):
        poly = _S2 * np.polynomial.Polynomial([0] * m + [1])
        anti = poly.integ()
        mu.append(anti(1.0) - anti(0.0))
    coef = {}
    for p in range(1, P + 1):
        cp = (-1) ** p / (2 * p + 1)
        for m in range(M + 1):
            key = 2 * p + m
            coef[key] = coef.get(key, 0.0) + cp * comb(2 * p + m - 1, m) * mu[m]
    return sorted(coef.items())


_SERIES = _series_coeffs()
_NEAR = 40.0
_NGL = 24


def _kernel_C(tau) -> np.ndarray:
    """(1/pi) int_0^1 S''(t) h(tau - t) dt, the per-eigenvalue HS correction."""
    tau = np.asarray(tau, dtype=float)
    out = np.zeros_like(tau)
    near = np.abs(tau - 0.5) <= _NEAR
    if np.any(near):
        tn = tau[near]
        c = np.clip(tn, 0.0, 1.0)
        x, w = _gl(_NGL)
        # panels [0, c] and [c, 1] so the kink of h at t = tau is a node boundary
        t1 = (x[None, :] + 1) * 0.5 * c[:, None]
        w1 = w[None, :] * 0.5 * c[:, None]
        t2 = c[:, None] + (x[None, :] + 1) * 0.5 * (1 - c[:, None])
        w2 = w[None, :] * 0.5 * (1 - c[:, None])
        v = np.sum(w1 * _S2(t1) * _h(tn[:, None] - t1), axis=1)
        v += np.sum(w2 * _S2(t2) * _h(tn[:, None] - t2), axis=1)
        out[near] = v
    far = ~near
    if np.any(far):
        tf = tau[far]
        out[far] = sum(c * tf ** (-p) for p, c in _SERIES)
    return out / np.pi


def _left_correction(lam: np.ndarray, eta1: float) -> float:
    """Kernel contribution of the fixed ramp of f_E on [-11, -10]."""
    x, w = _gl(_NGL)
    t = (x + 1) / 2
    wt = w / 2
    d = lam[:, None] - (-11.0 + t[None, :])
    a = np.abs(d)
    g = a * np.arctan2(eta1, a)
    return float(-np.sum(wt[None, :] * _S2(t)[None, :] * g) / np.pi)


def hs_F(lam, E, eta1: float) -> np.ndarray:
    """F_E for an array of energies, evaluated spectrally."""
    lam = np.asarray(lam, dtype=float)
    E = np.atleast_1d(np.asarray(E, dtype=float))
    base = float(np.sum(mol.ramp(lam, -11.0, -10.0))) + _left_correction(lam, eta1)
    tau = (lam[None, :] - E[:, None]) / eta1
    vals = -mol.smoothstep(tau) + _kernel_C(tau)
    return base + vals.sum(axis=1)


def hs_F_quadrature(lam, E: float, eta1: float, panels: int = 8, n_gl: int = 16) -> dict:
    """F_E from the three Helffer-Sjostrand integrals by tensor-product quadrature.

    Returns the total and the three terms. ``panels`` controls the resolution of
    every axis.
    """
    lam = np.asarray(lam, dtype=float)
    N = len(lam)
    x, w = _gl(n_gl)

    def nodes(a, b, P):
        edges = np.linspace(a, b, P + 1)
        h = np.diff(edges)
        t = edges[:-1, None] + (x[None, :] + 1) * 0.5 * h[:, None]
        ww = w[None, :] * 0.5 * h[:, None]
        return t.ravel(), ww.ravel()

    def geo_nodes(a, b, P):
        edges = np.geomspace(a, b, P + 1)
        h = np.diff(edges)
        t = edges[:-1, None] + (x[None, :] + 1) * 0.5 * h[:, None]
        ww = w[None, :] * 0.5 * h[:, None]
        return t.ravel(), ww.ravel()

    def mN(e, s):
        z = e[:, None] + 1j * s[None, :]
        return np.mean(1.0 / (lam[:, None, None] - z[None]), axis=0)

    eL, wL = nodes(-11.0, -10.0, panels)
    eR, wR = nodes(E, E + eta1, 4 * panels)
    eM, wM = nodes(-10.0, E, max(panels, int(np.ceil((E + 10.0) / 0.05))))
    e_ramp = np.concatenate([eL, eR])
    w_ramp = np.concatenate([wL, wR])
    fp_ramp = mol.f_E(e_ramp, E, eta1, deriv=1)

    # D term
    mD = mN(e_ramp, np.array([eta1]))[:, 0]
    D = N / np.pi * np.sum(w_ramp * fp_ramp * eta1 * mD.real)

    # B term: sigma in [eta1, 2], geometric panels resolve the small-sigma end
    nsig = max(4 * panels, int(np.ceil(4 * np.log2(2.0 / eta1))))
    sB, wsB = geo_nodes(eta1, 2.0, nsig)
    gB = mol.chi_cut(sB) + sB * mol.chi_cut(sB, deriv=1)
    mB = mN(e_ramp, sB)
    B = N / np.pi * np.sum((w_ramp * fp_ramp)[:, None] * (wsB * gB)[None, :] * mB.real)

    # A term: sigma in [1, 2]
    sA, wsA = nodes(1.0, 2.0, panels)
    cA = mol.chi_cut(sA, deriv=1)
    e_all = np.concatenate([eL, eM, eR])
    w_all = np.concatenate([wL, wM, wR])
    f_all = mol.f_E(e_all, E, eta1)
    fp_all = mol.f_E(e_all, E, eta1, deriv=1)
    mA = mN(e_all, sA)
    integrand = f_all[:, None] * mA.imag + sA[None, :] * fp_all[:, None] * mA.real
    A = -N / np.pi * np.sum(w_all[:, None] * (wsA * cA)[None, :] * integrand)
    return {"F": float(A + B + D), "A": float(A), "B": float(B), "D": float(D)}


def _e_nodes(win: HsWindow, per_eta: int, n_gl: int):
    P = max(1, int(np.ceil((win.hi - win.lo) / (win.eta1 / per_eta))))
    edges = np.linspace(win.lo, win.hi, P + 1)
    x, w = _gl(n_gl)
    h = np.diff(edges)
    t = edges[:-1, None] + (x[None, :] + 1) * 0.5 * h[:, None]
    ww = w[None, :] * 0.5 * h[:, None]
    return t.ravel(), ww.ravel()


def _lam_tilde_from_F(win, Fvals, weights):
    return float(win.lo + np.sum(weights * mol.r_n(Fvals, win.i)))


def hs_regularized_eigenvalue(
    X,
    i: int,
    delta: float,
    eps: float,
    method: str = "spectral",
    per_eta: int = 8,
    n_gl: int = 8,
    check: bool = False,
    tol: float | None = None,
    return_info: bool = False,
):
    """Regularized eigenvalue of index i (1-based).

    ``X`` is a matrix, a :class:`Spectrum` or an eigenvalue array. With
    ``check=True`` the energy integral is recomputed with twice as many panels
    and :class:`QuadratureError` is raised if the two disagree by more than
    ``tol`` (default ``1e-6 * eta1``).
    """
    lam = _as_lam(X)
    N = len(lam)
    win = hs_window(N, i, delta, eps)
    E, wE = _e_nodes(win, per_eta, n_gl)
    if method == "spectral":
        F = hs_F(lam, E, win.eta1)
    elif method == "quadrature":
        F = np.array([hs_F_quadrature(lam, e, win.eta1)["F"] for e in E])
    else:
        raise ValueError(f"unknown method {method!r}")
    val = _lam_tilde_from_F(win, F, wE)
    info = {"window": win, "refined": None}
    if check:
        E2, w2 = _e_nodes(win, 2 * per_eta, n_gl)
        F2 = hs_F(lam, E2, win.eta1) if method == "spectral" else np.array(
            [hs_F_quadrature(lam, e, win.eta1)["F"] for e in E2]
        )
        val2 = _lam_tilde_from_F(win, F2, w2)
        info["refined"] = val2
        tol = 1e-6 * win.eta1 if tol is None else tol
        if abs(val2 - val) > tol:
            raise QuadratureError(
                f"lambda_tilde_{i}: refinements differ by {abs(val2 - val):.3e} > {tol:.3e}"
            )
    return (val, info) if return_info else val


def regularized_eigenvalues(X, indices, delta: float, eps: float, **kw) -> np.ndarray:
    lam = _as_lam(X)
    return np.array([hs_regularized_eigenvalue(lam, int(i), delta, eps, **kw) for i in indices])


# ---------------------------------------------------------------------------
# Regularized eigenvector projections


def adaptive_simpson(f, a: float, b: float, rtol: float = 1e-8, atol: float = 0.0, max_depth: int = 40):
    """Adaptive Simpson rule for a scalar- or vector-valued integrand.

    Convergence is judged in the max norm against ``max(atol, rtol * |I|)``,
    where ``|I|`` is the largest component of the coarse estimate.
    """
    fa, fb = np.asarray(f(a), float), np.asarray(f(b), float)
    m = 0.5 * (a + b)
    fm = np.asarray(f(m), float)
    whole = (b - a) / 6.0 * (fa + 4 * fm + fb)
    scale = float(np.max(np.abs(whole))) if np.size(whole) else 0.0
    tol0 = max(atol, rtol * scale, 1e-300)
    total = np.zeros_like(whole)
    stack = [(a, b, fa, fm, fb, whole, tol0, 0)]
    while stack:
        a_, b_, fa_, fm_, fb_, S, tol_, d = stack.pop()
        m_ = 0.5 * (a_ + b_)
        lm, rm = 0.5 * (a_ + m_), 0.5 * (m_ + b_)
        flm, frm = np.asarray(f(lm), float), np.asarray(f(rm), float)
        left = (m_ - a_) / 6.0 * (fa_ + 4 * flm + fm_)
        right = (b_ - m_) / 6.0 * (fm_ + 4 * frm + fb_)
        err = float(np.max(np.abs(left + right - S)))
        if err <= 15.0 * tol_ or d >= max_depth:
            total = total + left + right + (left + right - S) / 15.0
        else:
            stack.append((a_, m_, fa_, flm, fm_, left, tol_ / 2, d + 1))
            stack.append((m_, b_, fm_, frm, fb_, right, tol_ / 2, d + 1))
    return total


def _v_window(N: int, ell: int, params: RegParams, center: float):
    lh = hat(ell, N)
    half = N ** (-params.delta2) / (2.0 * N ** (2.0 / 3.0) * lh ** (1.0 / 3.0))
    eta = N ** (-params.eps2) / (N ** (2.0 / 3.0) * lh ** (1.0 / 3.0))
    return center - half, center + half, eta


def regularized_projection(
    X, q, ell: int, params: RegParams, lam_tilde: float | None = None, rtol: float = 1e-8
):
    """v_ell(q): (1/pi) times the integral of Im <q, G(E + i eta_ell) q> over the half window.

    ``q`` may be a vector or an (N, Q) matrix of directions, in which case a
    length-Q array is returned.
    """
    S = _as_spectrum(X)
    N = S.N
    if lam_tilde is None:
        lam_tilde = hs_regularized_eigenvalue(S, ell, params.delta1, params.eps1)
    a, b, eta = _v_window(N, ell, params, lam_tilde)
    q = np.asarray(q, dtype=float)
    W = (S.U.T @ q) ** 2  # (N,) or (N, Q)
    lam = S.lam

    def integrand(E):
        ker = eta / ((lam - E) ** 2 + eta * eta)
        return ker @ W / np.pi

    val = adaptive_simpson(integrand, a, b, rtol=rtol)
    val = np.maximum(val, 0.0)
    return float(val) if np.ndim(val) == 0 else val


@dataclass(frozen=True)
class TValue:
    T: float
    chi: float
    F: float
    v: float


def observable_T(X, q, ell: int, params: RegParams, lam_tilde: dict | None = None) -> TValue:
    """T = N * r_k(F) * v_ell with F summing the window q_{ell} over nearby lambda_tilde."""
    S = _as_spectrum(X)
    N = S.N
    lam_tilde = dict(lam_tilde or {})
    reach = int(np.floor(N**params.nu + 1e-12))
    idx = [p for p in range(ell - reach, ell + reach + 1) if 1 <= p <= N]
    for p in idx:
        if p not in lam_tilde:
            lam_tilde[p] = hs_regularized_eigenvalue(S, p, params.delta1, params.eps1)
    w = N ** (-params.delta2) / (N ** (2.0 / 3.0) * hat(ell, N) ** (1.0 / 3.0))
    F = float(sum(mol.q_window(lam_tilde[p], lam_tilde[ell], w) for p in idx))
    chi = float(mol.r_k(F, params.k))
    v = regularized_projection(S, q, ell, params, lam_tilde=lam_tilde[ell])
    return TValue(N * chi * v, chi, F, v)


# ---------------------------------------------------------------------------
# Free energy and the smoothed threshold


def free_energy(w, beta: float) -> float:
    """A_beta(w) = log(sum exp(beta w_i)) / beta, overflow-safe."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    w = np.asarray(w, dtype=float)
    return float(logsumexp(beta * w) / beta)


def smoothed_threshold_S(v, eps: float, beta: float, N: int | None = None) -> float:
    """f_eps(A_beta(v)) with plateaus at (2 + eps) log N and (2 + 2 eps) log N."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    v = np.asarray(v, dtype=float)
    N = len(v) if N is None else N
    return float(mol.f_eps(free_energy(v, beta), eps, N))


def S_statistic(X, ell: int, params: RegParams, eps: float) -> dict:
    """S = f_eps(A_beta(N v_ell(e_i))_i) together with its ingredients."""
    S = _as_spectrum(X)
    N = S.N
    v = N * regularized_projection(S, np.eye(N), ell, params)
    beta = params.beta_for(N)
    A = free_energy(v, beta)
    return {"S": float(mol.f_eps(A, eps, N)), "A": A, "max_v": float(v.max()), "beta": beta}


# ---------------------------------------------------------------------------
# Good events


@dataclass
class EventReport:
    """Margins are ratios to the allowed size; a flag passes when its margin is <= 1."""

    omega: float
    iso_margin: float
    sclaw_margin: float
    gij_margin: float
    rigidity_margin: float
    deloc_margin: float
    b2_margin: float | None = None
    b3_count: int | None = None
    k: int | None = None
    b1_small_margin: float | None = None
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        f = {
            "isotropic": self.iso_margin <= 1.0,
            "semicircle": self.sclaw_margin <= 1.0,
            "entrywise": self.gij_margin <= 1.0,
            "rigidity": self.rigidity_margin <= 1.0,
            "delocalization": self.deloc_margin <= 1.0,
        }
        if self.b2_margin is not None:
            f["B2"] = self.b2_margin <= 1.0
        if self.b3_count is not None:
            f["B3"] = self.b3_count <= self.k
        self.flags = f

    @property
    def local_law_pass(self) -> bool:
        return all(self.flags[k] for k in ("isotropic", "semicircle", "entrywise", "rigidity", "delocalization"))

    @property
    def all_pass(self) -> bool:
        return all(self.flags.values())

    @property
    def b1_small_pass(self) -> bool | None:
        return None if self.b1_small_margin is None else self.b1_small_margin <= 1.0


def _grid(N: int, omega: float, nE: int, neta: int):
    Emax = min(1.0 / omega, 50.0)
    E = np.linspace(-Emax * (1 - 1e-9), Emax * (1 - 1e-9), nE)
    eta = np.geomspace(N ** (-1.0 + omega), 1.0 / omega, neta)
    return E, eta


def _law_margins(S: Spectrum, q, omega: float, nE: int, neta: int, nE_g: int, neta_g: int):
    N = S.N
    lam = S.lam
    E, eta = _grid(N, omega, nE, neta)
    Z = E[:, None] + 1j * eta[None, :]
    ms = m_sc(Z)
    H = eta[None, :] * np.ones_like(E)[:, None]
    err = N**omega * (np.sqrt(ms.imag / (N * H)) + 1.0 / (N * H))
    R = 1.0 / (lam[:, None, None] - Z[None])
    w = (S.U.T @ q) ** 2
    qGq = np.tensordot(w, R, axes=(0, 0))
    iso = float(np.max(np.abs(qGq - ms) / err))
    mN = R.mean(axis=0)
    scl = float(np.max(np.abs(mN - ms) * N * H / N**omega))
    # entrywise resolvent on a coarser grid
    Eg, etag = _grid(N, omega, nE_g, neta_g)
    gij = 0.0
    for e in Eg:
        for h in etag:
            z = e + 1j * h
            G = (S.U / (lam - z)) @ S.U.T
            G[np.diag_indices(N)] -= m_sc(z)
            bound = N**omega * (np.sqrt(m_sc(z).imag / (N * h)) + 1.0 / (N * h))
            gij = max(gij, float(np.max(np.abs(G)) / bound))
    return iso, scl, gij


def event_check(
    X,
    q,
    params: RegParams,
    ell: int | None = None,
    omega: float | None = None,
    b2_indices=None,
    grid=(41, 13),
    grid_entrywise=(9, 5),
    check_small: bool = True,
) -> EventReport:
    """Evaluate the good-event conditions for one matrix and direction q.

    Local-law conditions are checked on a grid over the spectral domain
    (linear in E, log-spaced in eta), for the unperturbed matrix only. B2 is
    checked at ``b2_indices`` (default: both edges, the middle, and ``ell``'s
    neighbours). B3 counts eigenvalues in I_{delta2}(lambda_ell) when ``ell`` is
    given. The B1 condition at exponent eps2/8 is reported separately and is not
    part of ``all_pass``.
    """
    S = _as_spectrum(X)
    N = S.N
    q = np.asarray(q, dtype=float)
    om = params.omega if omega is None else omega
    iso, scl, gij = _law_margins(S, q, om, grid[0], grid[1], *grid_entrywise)
    g = _gamma(N)
    k = np.arange(1, N + 1)
    kh = np.minimum(k, N - k + 1)
    rig = float(np.max(np.abs(S.lam - g) * N ** (2.0 / 3.0) * kh ** (1.0 / 3.0)) / N**om)
    deloc = float(np.max((S.U.T @ q) ** 2) * N ** (1.0 - om))
    b2 = None
    if b2_indices is None:
        b2_indices = sorted({1, max(1, N // 2), N} | ({p for p in (ell - 1, ell, ell + 1) if 1 <= p <= N} if ell else set()))
    if len(b2_indices):
        ratios = []
        for i in b2_indices:
            lt = hs_regularized_eigenvalue(S, i, params.delta1, params.eps1)
            bound = N**params.eps1 / (N ** (2.0 / 3.0 + params.delta1) * hat(i, N) ** (1.0 / 3.0))
            ratios.append(abs(lt - S.lam[i - 1]) / bound)
        b2 = float(max(ratios))
    b3 = None
    if ell is not None:
        half = N ** (-params.delta2) / (N ** (2.0 / 3.0) * hat(ell, N) ** (1.0 / 3.0))
        c = S.lam[ell - 1]
        b3 = int(np.searchsorted(S.lam, c + half, "right") - np.searchsorted(S.lam, c - half, "left"))
    small = None
    if check_small:
        om2 = params.eps2 / 8.0
        i2, s2, g2 = _law_margins(S, q, om2, grid[0], grid[1], *grid_entrywise)
        r2 = float(np.max(np.abs(S.lam - g) * N ** (2.0 / 3.0) * kh ** (1.0 / 3.0)) / N**om2)
        d2 = float(np.max((S.U.T @ q) ** 2) * N ** (1.0 - om2))
        small = max(i2, s2, g2, r2, d2)
    return EventReport(
        omega=om,
        iso_margin=iso,
        sclaw_margin=scl,
        gij_margin=gij,
        rigidity_margin=rig,
        deloc_margin=deloc,
        b2_margin=b2,
        b3_count=b3,
        k=params.k if ell is not None else None,
        b1_small_margin=small,
    )


def sandwich_slacks(X, q, ell: int, params: RegParams, lam_tilde: float | None = None) -> dict:
    """Both sandwich differences for index ell, and their ratios to the slack scales.

    upper: v_ell - sum_{|p - ell| < k} <q, u_p>^2, slack N^-1 (N^{3w + d2 - e2} + N^{e1 + 5 e2 - d1})
    lower: <q, u_ell>^2 - v_ell,                  slack N^-1 (N^{w + d2 - e2} + N^{e1 + 5 e2 - d1})
    """
    S = _as_spectrum(X)
    N = S.N
    p = params
    v = regularized_projection(S, q, ell, p, lam_tilde=lam_tilde)
    ov = (S.U.T @ np.asarray(q, float)) ** 2
    lo_i, hi_i = max(1, ell - p.k + 1), min(N, ell + p.k - 1)
    window = float(ov[lo_i - 1 : hi_i].sum())
    tail = N ** (p.eps1 + 5 * p.eps2 - p.delta1)
    s_up = (N ** (3 * p.omega + p.delta2 - p.eps2) + tail) / N
    s_lo = (N ** (p.omega + p.delta2 - p.eps2) + tail) / N
    up = v - window
    lo = float(ov[ell - 1]) - v
    return {
        "v": v,
        "upper_diff": up,
        "lower_diff": lo,
        "upper_slack": s_up,
        "lower_slack": s_lo,
        "upper_ratio": up / s_up,
        "lower_ratio": lo / s_lo,
    }


# ---------------------------------------------------------------------------
# Finite differences


def _bump(M: np.ndarray, a: int, b: int, t: float) -> np.ndarray:
    out = np.array(M, dtype=float, copy=True)
    out[a, b] += t
    if a != b:
        out[b, a] += t
    return out


def _central(fn, M, a, b, order, h):
    f = lambda t: fn(_bump(M, a, b, t))
    if order == 1:
        return (f(h) - f(-h)) / (2 * h)
    if order == 2:
        return (f(h) - 2 * f(0.0) + f(-h)) / (h * h)
    if order == 3:
        return (f(2 * h) - 2 * f(h) + 2 * f(-h) - f(-2 * h)) / (2 * h**3)
    raise ValueError("order must be 1, 2 or 3")


def finite_diff(fn, M, a: int, b: int, order: int = 1, h: float = 1e-3) -> float:
    """Derivative of fn along the symmetric bump of entries (a, b) and (b, a), 0-based.

    Central differences at steps h and h/2 combined by Richardson extrapolation.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    d1 = _central(fn, M, a, b, order, h)
    d2 = _central(fn, M, a, b, order, h / 2)
    return float((4.0 * d2 - d1) / 3.0)


# ---------------------------------------------------------------------------
# Audit export


def audit_json(X, indices, delta: float, eps: float, path=None) -> dict:
    """Per-index regularized eigenvalue audit; written to ``path`` when given."""
    lam = _as_lam(X)
    N = len(lam)
    rows = []
    for i in indices:
        lt = hs_regularized_eigenvalue(lam, int(i), delta, eps)
        bound = N ** (eps - delta) / (N ** (2.0 / 3.0) * hat(int(i), N) ** (1.0 / 3.0))
        rows.append(
            {
                "index": int(i),
                "lambda": float(lam[int(i) - 1]),
                "lambda_tilde": lt,
                "bound": bound,
                "pass": bool(abs(lt - lam[int(i) - 1]) <= bound),
            }
        )
    doc = {"N": N, "delta": delta, "eps": eps, "rows": rows}
    if path is not None:
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2)
    return doc
