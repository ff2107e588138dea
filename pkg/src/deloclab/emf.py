"""Eigenvector moment flow.

A configuration ``xi`` places ``n`` particles on sites ``1..N``; site ``k``
refers to the eigenvector of the k-th smallest eigenvalue. The moment observable
of a configuration is

    prod_k (sqrt(N) <q, u_k>)^(2 xi_k) / M(xi),   M(xi) = prod_k (2 xi_k - 1)!!

and its conditional expectation given the eigenvalue path solves a linear
system of ODEs whose generator moves one particle from site k to site l at rate
``rate_factor * xi_k (1 + 2 xi_l) / (N (lam_k - lam_l)^2)``.

The default ``rate_factor=1`` is the rate that makes the flow dual to the
eigenvector SDE of :mod:`deloclab.dbm`; this is checked by Monte Carlo in the
test suite. ``rate_factor=2`` gives the doubled-rate convention.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb

import numpy as np
import scipy.sparse as sp

from .dbm import eigenvector_sde, goe_increment
from .ensembles import EnsembleSpec, sample_ensemble
from .linalg import eigh
from .rng import generator

__all__ = [
    "Configuration",
    "move_particle",
    "normalization",
    "ConfigCodec",
    "EmfState",
    "StateSpaceError",
    "emf_generator",
    "generator_matrix",
    "integrate_emf",
    "moment_vector",
    "observable",
    "MomentEstimate",
    "moment_mc",
    "STATE_CAP",
]

STATE_CAP = 200_000


class StateSpaceError(ValueError):
    """The dense configuration space is larger than :data:`STATE_CAP`."""


@dataclass(frozen=True)
class Configuration:
    """Sparse particle configuration: sorted ``(site, multiplicity)`` pairs, sites 1-based."""

    items: tuple = ()

    @classmethod
    def from_dict(cls, d: dict) -> "Configuration":
        for s, m in d.items():
            if s < 1 or m < 0:
                raise ValueError("sites are >= 1 and multiplicities >= 0")
        return cls(tuple(sorted((int(s), int(m)) for s, m in d.items() if m > 0)))

    @classmethod
    def from_sites(cls, sites) -> "Configuration":
        d: dict = {}
        for s in sites:
            d[s] = d.get(s, 0) + 1
        return cls.from_dict(d)

    def as_dict(self) -> dict:
        return dict(self.items)

    def __getitem__(self, site: int) -> int:
        return self.as_dict().get(site, 0)

    @property
    def n(self) -> int:
        return sum(m for _, m in self.items)

    def dense(self, N: int) -> np.ndarray:
        out = np.zeros(N, dtype=np.int64)
        for s, m in self.items:
            if s > N:
                raise ValueError(f"site {s} outside 1..{N}")
            out[s - 1] = m
        return out


def move_particle(xi: Configuration, i: int, j: int) -> Configuration:
    """Move one particle from site i to site j; identity if site i is empty or i == j."""
    d = xi.as_dict()
    if i == j or d.get(i, 0) == 0:
        return xi
    d[i] -= 1
    d[j] = d.get(j, 0) + 1
    return Configuration.from_dict(d)


def _double_factorial_odd(m):
    """(2m - 1)!! elementwise for integer m >= 0."""
    m = np.asarray(m)
    out = np.ones(m.shape, dtype=float)
    for r in range(1, int(m.max(initial=0)) + 1):
        out = np.where(m >= r, out * (2 * r - 1), out)
    return out


def normalization(xi: Configuration) -> float:
    """M(xi) = prod_k (2 xi_k - 1)!!."""
    return float(np.prod(_double_factorial_odd(np.array([m for _, m in xi.items], dtype=int))))


class ConfigCodec:
    """Colexicographic ranking of n-particle configurations on N sites.

    A configuration is written as sites a_0 <= ... <= a_{n-1} (0-based) and
    mapped to the strictly increasing c_i = a_i + i; its rank is sum_i C(c_i, i+1).
    """

    def __init__(self, N: int, n: int, cap: int = STATE_CAP):
        self.N, self.n = N, n
        self.size = comb(N + n - 1, n)
        if self.size > cap:
            raise StateSpaceError(
                f"C(N+n-1, n) = {self.size} configurations for N={N}, n={n} exceeds cap {cap}"
            )
        combos = np.array(
            list(itertools.combinations_with_replacement(range(N), n)), dtype=np.int64
        ).reshape(-1, n)
        ranks = self._rank_sorted(combos)
        order = np.argsort(ranks)
        self.sites = combos[order]  # (S, n) 0-based sorted site lists
        self.mult = np.zeros((self.size, N), dtype=np.int64)
        for c in range(n):
            np.add.at(self.mult, (np.arange(self.size), self.sites[:, c]), 1)

    @staticmethod
    def _rank_sorted(a: np.ndarray) -> np.ndarray:
        r = np.zeros(a.shape[0], dtype=np.int64)
        if a.size == 0:
            return r
        top = int(a.max()) + a.shape[1]
        for i in range(a.shape[1]):
            tab = np.array([comb(x, i + 1) for x in range(top + 1)], dtype=np.int64)
            r += tab[a[:, i] + i]
        return r

    def rank(self, xi: Configuration) -> int:
        if xi.n != self.n:
            raise ValueError(f"configuration has {xi.n} particles, codec expects {self.n}")
        sites = sorted(s - 1 for s, m in xi.items for _ in range(m))
        return int(sum(comb(s + i, i + 1) for i, s in enumerate(sites)))

    def unrank(self, r: int) -> Configuration:
        return Configuration.from_sites((self.sites[r] + 1).tolist())

    def normalizations(self) -> np.ndarray:
        return np.prod(_double_factorial_odd(self.mult), axis=1)


@dataclass(frozen=True)
class EmfState:
    """Dense function on all n-particle configurations, indexed by colex rank."""

    codec: ConfigCodec
    f: np.ndarray

    @property
    def n(self) -> int:
        return self.codec.n

    @property
    def N(self) -> int:
        return self.codec.N

    def __getitem__(self, xi: Configuration) -> float:
        return float(self.f[self.codec.rank(xi)])


class _Transitions:
    """Static jump structure: for each (config, k, l) the target and xi_k (1 + 2 xi_l)."""

    def __init__(self, codec: ConfigCodec):
        N, n = codec.N, codec.n
        S = codec.size
        sites = codec.sites
        tab = np.array(
            [[comb(x + i, i + 1) for i in range(n)] for x in range(N)], dtype=np.int64
        ).reshape(N, n)
        src, dst, ks, ls, coef = [], [], [], [], []
        rows = np.arange(S)
        for c in range(n):
            # one removal per distinct occupied site
            first = np.ones(S, dtype=bool) if c == 0 else sites[:, c] != sites[:, c - 1]
            r = rows[first]
            k = sites[first, c]
            base = np.delete(sites[first], c, axis=1)
            for l in range(N):
                keep = k != l
                if not np.any(keep):
                    continue
                new = np.sort(
                    np.concatenate([base[keep], np.full((keep.sum(), 1), l)], axis=1), axis=1
                )
                rank = tab[new, np.arange(n)[None, :]].sum(axis=1)
                src.append(r[keep])
                dst.append(rank)
                ks.append(k[keep])
                ls.append(np.full(keep.sum(), l))
                coef.append(
                    codec.mult[r[keep], k[keep]] * (1 + 2 * codec.mult[r[keep], l])
                )
        cat = lambda a, dt: np.concatenate(a).astype(dt) if a else np.zeros(0, dt)
        self.src = cat(src, np.int64)
        self.dst = cat(dst, np.int64)
        self.k = cat(ks, np.int64)
        self.l = cat(ls, np.int64)
        self.coef = cat(coef, float)
        self.size = S


_TRANS_CACHE: dict = {}


def _transitions(codec: ConfigCodec) -> _Transitions:
    key = (codec.N, codec.n)
    if key not in _TRANS_CACHE:
        _TRANS_CACHE[key] = _Transitions(codec)
    return _TRANS_CACHE[key]


def _check_distinct(lam: np.ndarray) -> None:
    if len(lam) > 1 and np.min(np.diff(np.sort(lam))) <= 0:
        raise ValueError("eigenvalues must be distinct")


def generator_matrix(codec: ConfigCodec, lam, rate_factor: float = 1.0) -> sp.csr_matrix:
    """Sparse generator L with (L f)(xi) = sum rate (f(xi^{kl}) - f(xi)); rows sum to 0."""
    lam = np.asarray(lam, dtype=float)
    _check_distinct(lam)
    tr = _transitions(codec)
    d = lam[tr.k] - lam[tr.l]
    rates = rate_factor * tr.coef / (codec.N * d * d)
    off = sp.csr_matrix((rates, (tr.src, tr.dst)), shape=(tr.size, tr.size))
    diag = np.asarray(off.sum(axis=1)).ravel()
    return (off - sp.diags(diag)).tocsr()


def emf_generator(state: EmfState, lam, rate_factor: float = 1.0) -> np.ndarray:
    """Time derivative of the moment observable at eigenvalues ``lam``."""
    return generator_matrix(state.codec, lam, rate_factor) @ state.f


def integrate_emf(
    f0: EmfState,
    lam_path,
    t: float,
    lam_times=None,
    rate_factor: float = 1.0,
    safety: float = 0.1,
) -> EmfState:
    """RK4 integration of the flow over [0, t] with a piecewise constant path.

    Substeps are at most ``safety * N * min_gap^2`` for the active eigenvalues
    and at most ``safety / max_exit_rate`` so that RK4 stays accurate when the
    gaps are large.
    """
    lam_path = np.atleast_2d(np.asarray(lam_path, dtype=float))
    if lam_times is None:
        if lam_path.shape[0] != 1:
            raise ValueError("lam_times required for a time-dependent path")
        lam_times = np.array([0.0])
    lam_times = np.asarray(lam_times, dtype=float)
    f = np.array(f0.f, dtype=float, copy=True)
    if t <= 0:
        return EmfState(f0.codec, f)
    N = f0.N
    breaks = sorted(set([x for x in lam_times[1:] if 0 < x < t] + [t]))
    s = 0.0
    for stop in breaks:
        j = max(int(np.searchsorted(lam_times, s, side="right")) - 1, 0)
        lam = lam_path[j]
        L = generator_matrix(f0.codec, lam, rate_factor)
        gap = np.min(np.diff(np.sort(lam))) if N > 1 else np.inf
        exit_rate = float(np.max(-L.diagonal())) if L.nnz else 0.0
        hmax = safety * N * gap * gap
        if exit_rate > 0:
            hmax = min(hmax, safety / exit_rate)
        nsub = max(1, int(np.ceil((stop - s) / hmax)))
        h = (stop - s) / nsub
        for _ in range(nsub):
            k1 = L @ f
            k2 = L @ (f + 0.5 * h * k1)
            k3 = L @ (f + 0.5 * h * k2)
            k4 = L @ (f + h * k3)
            f = f + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        s = stop
    if not np.all(np.isfinite(f)):
        raise FloatingPointError("non-finite moment observable after integration")
    return EmfState(f0.codec, f)


def moment_vector(U, q, codec: ConfigCodec) -> EmfState:
    """Moment observable of every configuration for the eigenbasis U and direction q."""
    z = U.shape[0] * (np.asarray(U).T @ np.asarray(q)) ** 2
    vals = np.prod(z[None, :] ** codec.mult, axis=1) / codec.normalizations()
    return EmfState(codec, vals)


def observable(U, q, xi: Configuration) -> np.ndarray:
    """Moment observable for one configuration; U may carry leading batch axes."""
    U = np.asarray(U)
    N = U.shape[-1]
    proj = np.einsum("...ik,i->...k", U, np.asarray(q))
    out = np.ones(proj.shape[:-1])
    for s, m in xi.items:
        out = out * (N * proj[..., s - 1] ** 2) ** m
    return out / normalization(xi)


@dataclass(frozen=True)
class MomentEstimate:
    mean: float
    stderr: float
    n: int

    def within(self, target: float, k: float = 3.0) -> bool:
        return abs(self.mean - target) <= k * self.stderr + 1e-15


def _estimate(x: np.ndarray) -> MomentEstimate:
    x = np.asarray(x, dtype=float)
    sd = float(np.std(x, ddof=1)) if len(x) > 1 else 0.0
    return MomentEstimate(float(np.mean(x)), sd / np.sqrt(len(x)), len(x))


def moment_mc(
    initial,
    q,
    xi: Configuration,
    t: float,
    replicas: int,
    mode: str = "unconditional",
    lam_path=None,
    lam_times=None,
    seed: int = 0,
    stream: int = 0,
) -> MomentEstimate:
    """Monte Carlo estimate of the moment observable at time t.

    ``initial`` is a fixed matrix or an :class:`EnsembleSpec` sampled afresh for
    each replica (replica r uses stream ``stream * replicas + r``). In
    ``"unconditional"`` mode each replica runs matrix DBM for time t. In
    ``"conditional"`` mode the eigenvalue path is frozen (``lam_path``, default
    the spectrum of the fixed initial matrix) and eigenvectors follow the SDE.
    """
    if replicas < 2:
        raise ValueError("replicas must be >= 2")
    q = np.asarray(q, dtype=float)
    if abs(np.linalg.norm(q) - 1.0) > 1e-10:
        raise ValueError("q must be a unit vector")
    if xi.n == 0:
        return MomentEstimate(1.0, 0.0, replicas)
    if mode == "unconditional":
        vals = np.empty(replicas)
        for r in range(replicas):
            sid = stream * replicas + r
            if isinstance(initial, EnsembleSpec):
                H0 = sample_ensemble(initial, sid)
            else:
                H0 = np.asarray(initial, dtype=float)
            g = generator(seed, sid, "dbm")
            Ht = H0 + goe_increment(H0.shape[0], g, t) if t > 0 else H0
            vals[r] = observable(eigh(Ht).U, q, xi)
        return _estimate(vals)
    if mode == "conditional":
        if isinstance(initial, EnsembleSpec):
            raise ValueError("conditional mode needs a fixed initial matrix")
        S0 = eigh(np.asarray(initial, dtype=float))
        path = S0.lam if lam_path is None else lam_path
        g = generator(seed, stream, "sde")
        U = eigenvector_sde(S0.U, path, t, g, replicas=replicas, lam_times=lam_times)
        return _estimate(observable(U, q, xi))
    raise ValueError(f"unknown mode {mode!r}")
