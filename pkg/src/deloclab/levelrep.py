"""Level repulsion: sub-microscopic intervals, GUE kernel counts, tail bounds.

The GUE here has off-diagonal variance 1/N, so its eigenvalue density is
``sqrt(N) K_N(sqrt(N) x, sqrt(N) x)`` with ``K_N(x, x) = sum_{k<N} psi_k(x)^2``
built from orthonormal Hermite functions.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .ensembles import EnsembleSpec, sample_ensemble
from .regularization import hat
from .stats import wilson_interval

__all__ = [
    "kappa",
    "RepulsionInterval",
    "count_in_interval",
    "hermite_functions",
    "gue_density",
    "gue_expected_count",
    "gue_factorial_moment2",
    "chernoff_tail_bound",
    "ChernoffResult",
    "decimate_goe_pair",
    "TailEstimate",
    "gap_tail_mc",
    "N_MAX_KERNEL",
]

N_MAX_KERNEL = 500


def kappa(E, N: int):
    """max(N^{-2/3}, min(|E + 2|, |E - 2|))."""
    E = np.asarray(E, dtype=float)
    return np.maximum(N ** (-2.0 / 3.0), np.minimum(np.abs(E + 2), np.abs(E - 2)))


@dataclass(frozen=True)
class RepulsionInterval:
    center: float
    delta: float
    a: float
    N: int

    @property
    def half_width(self) -> float:
        return float(self.a * self.N ** (-self.delta) / (self.N * np.sqrt(kappa(self.center, self.N))))

    @property
    def lo(self) -> float:
        return self.center - self.half_width

    @property
    def hi(self) -> float:
        return self.center + self.half_width


def count_in_interval(lam, lo: float, hi: float) -> int:
    """Number of sorted values in the closed interval [lo, hi]."""
    lam = np.asarray(lam)
    if hi < lo:
        return 0
    return int(np.searchsorted(lam, hi, side="right") - np.searchsorted(lam, lo, side="left"))


def hermite_functions(n: int, x) -> np.ndarray:
    """psi_0..psi_{n-1} at x, shape (n, len(x)), orthonormal in L^2(dx)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty((n, x.size))
    with np.errstate(over="raise", invalid="raise"):
        try:
            out[0] = (2 * np.pi) ** -0.25 * np.exp(-x * x / 4)
            if n > 1:
                out[1] = x * out[0]
            for k in range(1, n - 1):
                out[k + 1] = x * out[k] / np.sqrt(k + 1) - np.sqrt(k / (k + 1)) * out[k - 1]
        except FloatingPointError as exc:
            raise OverflowError(
                f"Hermite recurrence overflow for n={n}; kernel budget is N <= {N_MAX_KERNEL}"
            ) from exc
    return out


def gue_density(N: int, lam) -> np.ndarray:
    """One-point density of GUE_N eigenvalues (integrates to N)."""
    if N > N_MAX_KERNEL:
        raise ValueError(f"N={N} exceeds kernel budget N <= {N_MAX_KERNEL}")
    s = np.sqrt(N)
    psi = hermite_functions(N, s * np.asarray(lam, dtype=float))
    return s * np.sum(psi * psi, axis=0)


def _gl_panels(f, a, b, P, n=20):
    x, w = np.polynomial.legendre.leggauss(n)
    edges = np.linspace(a, b, P + 1)
    h = np.diff(edges)
    t = edges[:-1, None] + (x[None, :] + 1) * 0.5 * h[:, None]
    return float(np.sum(w[None, :] * 0.5 * h[:, None] * f(t.ravel()).reshape(t.shape)))


def gue_expected_count(N: int, lo: float, hi: float, tol: float = 1e-8) -> float:
    """E #{eigenvalues of GUE_N in [lo, hi]} by adaptive composite Gauss-Legendre."""
    if N > N_MAX_KERNEL:
        raise ValueError(f"N={N} exceeds kernel budget N <= {N_MAX_KERNEL}")
    if hi <= lo:
        return 0.0
    # beyond this the density is below double precision
    reach = 2.0 + 15.0 / np.sqrt(N)
    a, b = max(lo, -reach), min(hi, reach)
    if b <= a:
        return 0.0
    f = lambda x: gue_density(N, x)
    # panel width about 1/N in spectral units resolves the oscillations
    P = max(2, int(np.ceil((b - a) * N)))
    prev = _gl_panels(f, a, b, P)
    for _ in range(12):
        P *= 2
        cur = _gl_panels(f, a, b, P)
        if abs(cur - prev) <= tol:
            return cur
        prev = cur
    raise RuntimeError("kernel quadrature did not converge")


def _gram(N, a, b, P, n=20):
    x, w = np.polynomial.legendre.leggauss(n)
    edges = np.linspace(a, b, P + 1)
    h = np.diff(edges)
    t = (edges[:-1, None] + (x[None, :] + 1) * 0.5 * h[:, None]).ravel()
    wt = (w[None, :] * 0.5 * h[:, None]).ravel()
    s = np.sqrt(N)
    psi = hermite_functions(N, s * t)
    return (psi * (s * wt)) @ psi.T


def gue_factorial_moment2(N: int, lo: float, hi: float, tol: float = 1e-8) -> float:
    """E[C(C - 1)] for C the number of GUE_N eigenvalues in [lo, hi].

    With A the Gram matrix of the rescaled Hermite functions on the interval,
    the determinantal structure gives E[C(C - 1)] = tr(A)^2 - ||A||_F^2.
    """
    if N > N_MAX_KERNEL:
        raise ValueError(f"N={N} exceeds kernel budget N <= {N_MAX_KERNEL}")
    reach = 2.0 + 15.0 / np.sqrt(N)
    a, b = max(lo, -reach), min(hi, reach)
    if b <= a:
        return 0.0

    def value(P):
        A = _gram(N, a, b, P)
        return float(np.trace(A) ** 2 - np.sum(A * A))

    P = max(2, int(np.ceil((b - a) * N)))
    prev = value(P)
    for _ in range(10):
        P *= 2
        cur = value(P)
        if abs(cur - prev) <= tol:
            return cur
        prev = cur
    raise RuntimeError("kernel quadrature did not converge")


@dataclass(frozen=True)
class ChernoffResult:
    value: float
    lam: float
    vacuous: bool

    def __float__(self) -> float:
        return self.value


def chernoff_tail_bound(k: float, expected: float, lambda_param: float | None = None) -> ChernoffResult:
    """Bound exp(-lam k + (e^lam - 1) E) on P(count >= k) for a Bernoulli sum.

    Without ``lambda_param`` the bound is minimized over lam > 0; when
    ``k <= expected`` the optimum is at lam -> 0 and the bound is the vacuous 1.
    """
    if expected < 0 or k < 1:
        raise ValueError("need expected >= 0 and k >= 1")
    if lambda_param is not None:
        v = math.exp(-lambda_param * k + math.expm1(lambda_param) * expected)
        return ChernoffResult(v, lambda_param, v >= 1.0)
    if k <= expected:
        return ChernoffResult(1.0, 0.0, True)
    if expected == 0:
        return ChernoffResult(0.0, math.inf, False)
    lam = math.log(k / expected)
    return ChernoffResult(math.exp(-lam * k + (k - expected)), lam, False)


def decimate_goe_pair(N: int, rng: np.random.Generator) -> np.ndarray:
    """Every other point of GOE_N merged with an independent GOE_{N+1}.

    Both matrices use the same variance scale 1/N (diagonal 2/N); the result has
    the law of GUE_N eigenvalues at that scale.
    """
    a = _goe_eigs(N, N, rng)
    b = _goe_eigs(N + 1, N, rng)
    merged = np.sort(np.concatenate([a, b]))
    return merged[1::2]


def _goe_eigs(n: int, scale_N: int, rng: np.random.Generator) -> np.ndarray:
    A = rng.standard_normal((n, n))
    H = (A + A.T) / np.sqrt(2.0 * scale_N)
    return np.linalg.eigvalsh(H)


@dataclass
class TailEstimate:
    ks: list
    p_hat: list
    ci_lo: list
    ci_hi: list
    n: int

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "p_hat", "ci_lo", "ci_hi", "n"])
            for row in zip(self.ks, self.p_hat, self.ci_lo, self.ci_hi):
                w.writerow([row[0], repr(row[1]), repr(row[2]), repr(row[3]), self.n])

    def stderr(self, j: int) -> float:
        p = self.p_hat[j]
        return math.sqrt(max(p * (1 - p), 0.0) / self.n)


def gap_tail_mc(
    spec: EnsembleSpec,
    replicas: int,
    delta: float,
    mode: str = "count",
    index: int | None = None,
    energy: float | None = None,
    a: float = 1.0,
    ks=(1, 2, 3),
    stream0: int = 0,
) -> TailEstimate:
    """Monte Carlo tail probabilities for eigenvalue counts or adjacent gaps.

    ``mode="count"``: P(count >= k) in an interval centred at the realized
    lambda_index (half width N^-delta / (N^{2/3} i_hat^{1/3})) or at a fixed
    ``energy`` (half width a N^-delta / (N sqrt(kappa))).
    ``mode="gap"``: P(lambda_{i+1} - lambda_i < N^-delta / (N^{2/3} i_hat^{1/3})),
    reported with ``ks = [1]``.
    """
    if replicas < 100:
        raise ValueError("replicas must be >= 100")
    N = spec.N
    if mode == "gap" and index is None:
        raise ValueError("gap mode needs an index")
    if mode == "count" and (index is None) == (energy is None):
        raise ValueError("count mode needs exactly one of index / energy")
    ks = [1] if mode == "gap" else list(ks)
    hits = np.zeros(len(ks), dtype=np.int64)
    for r in range(replicas):
        H = sample_ensemble(spec, stream0 + r)
        lam = np.linalg.eigvalsh(H)
        if mode == "gap":
            w = N ** (-delta) / (N ** (2.0 / 3.0) * hat(index, N) ** (1.0 / 3.0))
            hits[0] += int(lam[index] - lam[index - 1] < w)
            continue
        if index is not None:
            c = lam[index - 1]
            half = N ** (-delta) / (N ** (2.0 / 3.0) * hat(index, N) ** (1.0 / 3.0))
            lo, hi = c - half, c + half
        else:
            I = RepulsionInterval(energy, delta, a, N)
            lo, hi = I.lo, I.hi
        cnt = count_in_interval(lam, lo, hi)
        hits += np.array([cnt >= k for k in ks], dtype=np.int64)
    p = [float(h) / replicas for h in hits]
    ci = [wilson_interval(int(h), replicas) for h in hits]
    return TailEstimate(ks, p, [c[0] for c in ci], [c[1] for c in ci], replicas)
