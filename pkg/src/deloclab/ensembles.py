"""Wigner-type ensembles: variance profiles, entry laws and samplers."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .rng import generator

__all__ = [
    "ProfileError",
    "VarianceProfile",
    "ProfileReport",
    "EntryLaw",
    "EnsembleSpec",
    "matched_moment_law",
    "validate_profile",
    "sample_ensemble",
    "perturb_entry",
    "goe",
    "gue",
    "bernoulli",
    "sinkhorn_profile",
]


class ProfileError(ValueError):
    """A variance profile violates one of its invariants."""


@dataclass(frozen=True)
class ProfileReport:
    column_sums: np.ndarray
    min_scaled: float  # min N * sigma2
    max_scaled: float
    symmetric: bool
    stochastic: bool
    bounded: bool
    passed: bool
    note: str = ""

    def violated(self) -> list[str]:
        out = []
        if not self.symmetric:
            out.append("symmetry")
        if not self.stochastic:
            out.append("column sums equal to 1")
        if not self.bounded:
            out.append("c/N <= sigma2 <= C/N")
        return out


@dataclass(frozen=True, eq=False)
class VarianceProfile:
    """Matrix of entry variances ``sigma2[i, j]``.

    ``kind`` is ``"goe"`` for the GOE profile (diagonal ``2/N``), which is
    reported as non-stochastic but accepted by the samplers.
    """

    sigma2: np.ndarray
    kind: str = "general"
    c_lower: float = 0.0
    c_upper: float = np.inf

    @property
    def N(self) -> int:
        return self.sigma2.shape[0]

    @classmethod
    def flat(cls, N: int) -> "VarianceProfile":
        return cls(np.full((N, N), 1.0 / N), kind="flat")

    @classmethod
    def goe(cls, N: int) -> "VarianceProfile":
        s = np.full((N, N), 1.0 / N)
        np.fill_diagonal(s, 2.0 / N)
        return cls(s, kind="goe")

    @classmethod
    def from_csv(cls, path, **kw) -> "VarianceProfile":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        N = int(rows[0][0])
        data = np.array([[float(x) for x in r] for r in rows[1 : N + 1]])
        if data.shape != (N, N):
            raise ProfileError(f"expected {N}x{N} variances, got {data.shape}")
        return cls(data, **kw)

    def to_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([self.N])
            for row in self.sigma2:
                w.writerow([repr(float(x)) for x in row])


def validate_profile(p: VarianceProfile, tol: float = 1e-12) -> ProfileReport:
    """Check symmetry, column stochasticity and the c/N, C/N bounds."""
    s = np.asarray(p.sigma2, dtype=float)
    N = s.shape[0]
    cs = s.sum(axis=0)
    scaled = N * s
    symmetric = bool(np.array_equal(s, s.T))
    stochastic = bool(np.all(np.abs(cs - 1.0) <= tol))
    lo = p.c_lower if p.c_lower > 0 else 0.0
    bounded = bool(np.all(scaled >= lo) and np.all(scaled <= p.c_upper) and np.all(s > 0))
    note = ""
    if p.kind == "goe" and not stochastic:
        note = "GOE profile: column sums (N+1)/N, handled as a special case"
    return ProfileReport(
        column_sums=cs,
        min_scaled=float(scaled.min()),
        max_scaled=float(scaled.max()),
        symmetric=symmetric,
        stochastic=stochastic,
        bounded=bounded,
        passed=symmetric and stochastic and bounded,
        note=note,
    )


def sinkhorn_profile(N: int, rng: np.random.Generator, iterations: int = 50, spread: float = 0.5):
    """Random symmetric doubly stochastic profile by symmetric Sinkhorn scaling."""
    A = 1.0 + spread * rng.random((N, N))
    A = (A + A.T) / 2
    for _ in range(iterations):
        d = 1.0 / np.sqrt(A.sum(axis=0))
        A = A * d[:, None] * d[None, :]
    A = (A + A.T) / 2
    return VarianceProfile(A, kind="general", c_lower=0.1, c_upper=10.0)


@dataclass(frozen=True)
class EntryLaw:
    """Standardized scalar law (mean 0, variance 1).

    ``kind`` is ``"gaussian"``, ``"rademacher"`` or ``"three-point"``. The
    three-point law puts mass ``1/(2 m4)`` on each of ``+-sqrt(m4)`` and the rest
    on 0.
    """

    kind: str = "gaussian"
    m4: float | None = None

    def __post_init__(self):
        if self.kind not in ("gaussian", "rademacher", "three-point"):
            raise ValueError(f"unknown entry law {self.kind!r}")
        if self.kind == "three-point" and (self.m4 is None or self.m4 < 1):
            raise ValueError("three-point law needs m4 >= 1")

    def moment(self, k: int) -> float:
        """Exact k-th moment."""
        if k % 2 == 1:
            return 0.0
        if self.kind == "gaussian":
            return float(np.prod(np.arange(k - 1, 0, -2))) if k else 1.0
        if self.kind == "rademacher":
            return 1.0
        if k == 0:
            return 1.0
        return float(self.m4 ** (k / 2) / self.m4)

    def atoms(self):
        """(values, probabilities) for discrete laws."""
        if self.kind == "rademacher":
            return np.array([-1.0, 1.0]), np.array([0.5, 0.5])
        if self.kind == "three-point":
            a, p = np.sqrt(self.m4), 0.5 / self.m4
            return np.array([-a, 0.0, a]), np.array([p, 1 - 2 * p, p])
        raise ValueError("gaussian law has no atoms")

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.kind == "gaussian":
            return rng.standard_normal(size)
        if self.kind == "rademacher":
            return 2.0 * rng.integers(0, 2, size=size).astype(float) - 1.0
        u = rng.random(size)
        a, p = np.sqrt(self.m4), 0.5 / self.m4
        return np.where(u < p, a, np.where(u < 2 * p, -a, 0.0))


def matched_moment_law(m4: float) -> EntryLaw:
    """Bounded law with moments 0, 1, 0, m4."""
    if m4 < 1:
        raise ValueError("m4 must be >= 1 (Jensen)")
    if m4 == 1:
        return EntryLaw("rademacher")
    return EntryLaw("three-point", m4=float(m4))


@dataclass(frozen=True)
class EnsembleSpec:
    symmetry: str
    profile: VarianceProfile
    law: EntryLaw = field(default_factory=EntryLaw)
    seed: int = 0

    def __post_init__(self):
        if self.symmetry not in ("real", "complex"):
            raise ValueError("symmetry must be 'real' or 'complex'")
        if self.symmetry == "complex" and self.law.kind != "gaussian":
            raise ValueError("complex ensembles support only the gaussian law")

    @property
    def N(self) -> int:
        return self.profile.N


def goe(N: int, seed: int = 0) -> EnsembleSpec:
    return EnsembleSpec("real", VarianceProfile.goe(N), EntryLaw("gaussian"), seed)


def gue(N: int, seed: int = 0) -> EnsembleSpec:
    return EnsembleSpec("complex", VarianceProfile.flat(N), EntryLaw("gaussian"), seed)


def bernoulli(N: int, seed: int = 0) -> EnsembleSpec:
    return EnsembleSpec("real", VarianceProfile.flat(N), EntryLaw("rademacher"), seed)


def _check(profile: VarianceProfile) -> None:
    rep = validate_profile(profile)
    if profile.kind == "goe":
        bad = [v for v in rep.violated() if v != "column sums equal to 1"]
    else:
        bad = rep.violated()
    if bad:
        raise ProfileError("invalid variance profile: " + ", ".join(bad))


def sample_ensemble(spec: EnsembleSpec, stream: int = 0, rng: np.random.Generator | None = None):
    """Draw one matrix. Upper-triangle entries are drawn in row-major order.

    The result depends only on ``(spec.seed, stream)`` unless ``rng`` is given.
    """
    _check(spec.profile)
    N = spec.N
    if rng is None:
        rng = generator(spec.seed, stream, "matrix")
    iu = np.triu_indices(N)
    sd = np.sqrt(spec.profile.sigma2[iu])
    if spec.symmetry == "real":
        x = sd * spec.law.sample(rng, len(sd))
        H = np.zeros((N, N))
    else:
        g = rng.standard_normal((len(sd), 2))
        diag = iu[0] == iu[1]
        x = np.where(diag, g[:, 0], (g[:, 0] + 1j * g[:, 1]) / np.sqrt(2.0)) * sd
        H = np.zeros((N, N), dtype=complex)
    H[iu] = x
    low = np.tril_indices(N, -1)
    H[low] = H.T[low].conj() if spec.symmetry == "complex" else H.T[low]
    return H


def perturb_entry(M, a: int, b: int, w: float):
    """Copy of M with entries (a, b) and (b, a) multiplied by w (0-based)."""
    if not 0.0 <= w <= 1.0:
        raise ValueError("w must lie in [0, 1]")
    out = np.array(M, copy=True)
    out[a, b] = w * M[a, b]
    if a != b:
        out[b, a] = w * M[b, a]
    return out
