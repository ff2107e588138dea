"""Dyson Brownian motion at the matrix level and the eigenvector SDE.

Matrix paths are exact in law at grid times. Eigenvalue paths are obtained by
re-diagonalizing each snapshot instead of integrating the eigenvalue SDE.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .linalg import eigh

__all__ = [
    "DbmConfig",
    "MatrixPath",
    "SpectralPath",
    "CollisionError",
    "goe_increment",
    "evolve_additive",
    "evolve_ou",
    "spectral_path",
    "eigenvector_sde",
    "sde_step_size",
]


class CollisionError(RuntimeError):
    """Two eigenvalues of the driving path are closer than the collision floor."""


@dataclass(frozen=True)
class DbmConfig:
    t_final: float
    n_steps: int = 1
    variant: str = "additive"

    def __post_init__(self):
        if not self.t_final > 0:
            raise ValueError("t_final must be > 0")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if self.variant not in ("additive", "ou"):
            raise ValueError("variant must be 'additive' or 'ou'")

    @property
    def dt(self) -> float:
        return self.t_final / self.n_steps

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_final, self.n_steps + 1)


@dataclass
class MatrixPath:
    times: np.ndarray
    mats: list

    @property
    def final(self) -> np.ndarray:
        return self.mats[-1]


@dataclass
class SpectralPath:
    times: np.ndarray
    lam: np.ndarray  # (T, N)
    U: np.ndarray  # (T, N, N)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time", "index", "eigenvalue"])
            for t, row in zip(self.times, self.lam):
                for i, x in enumerate(row, start=1):
                    w.writerow([repr(float(t)), i, repr(float(x))])


def goe_increment(N: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """Symmetric Gaussian matrix with off-diagonal variance scale/N, diagonal 2*scale/N."""
    iu = np.triu_indices(N)
    g = rng.standard_normal(len(iu[0]))
    g = np.where(iu[0] == iu[1], np.sqrt(2.0), 1.0) * g * np.sqrt(scale / N)
    X = np.zeros((N, N))
    X[iu] = g
    return X + np.triu(X, 1).T


def evolve_additive(H0, cfg: DbmConfig, rng: np.random.Generator, keep: bool = True) -> MatrixPath:
    """H_{s+dt} = H_s + GOE-law increment of variance dt/N (2 dt/N on the diagonal)."""
    H = np.array(H0, dtype=float, copy=True)
    N = H.shape[0]
    mats = [H.copy()]
    for _ in range(cfg.n_steps):
        H = H + goe_increment(N, rng, cfg.dt)
        if keep:
            mats.append(H.copy())
    if not keep:
        mats = [mats[0], H]
    return MatrixPath(cfg.times() if keep else np.array([0.0, cfg.t_final]), mats)


def evolve_ou(H0, cfg: DbmConfig, rng: np.random.Generator, keep: bool = True) -> MatrixPath:
    """Exact OU transition H_{s+dt} = e^{-dt/2} H_s + sqrt(1 - e^{-dt}) G, G ~ GOE."""
    H = np.array(H0, dtype=float, copy=True)
    N = H.shape[0]
    a = np.exp(-cfg.dt / 2.0)
    b = np.sqrt(-np.expm1(-cfg.dt))
    mats = [H.copy()]
    for _ in range(cfg.n_steps):
        H = a * H + b * goe_increment(N, rng)
        if keep:
            mats.append(H.copy())
    if not keep:
        mats = [mats[0], H]
    return MatrixPath(cfg.times() if keep else np.array([0.0, cfg.t_final]), mats)


def spectral_path(path: MatrixPath) -> SpectralPath:
    """Diagonalize every snapshot and align eigenvector signs with the previous time.

    The first snapshot keeps the sign convention of :func:`deloclab.linalg.eigh`.
    """
    lams, Us = [], []
    prev = None
    for M in path.mats:
        S = eigh(M)
        U = S.U
        if prev is not None:
            dots = np.einsum("ij,ij->j", U, prev)
            U = U * np.where(dots < 0, -1.0, 1.0)[None, :]
        lams.append(S.lam)
        Us.append(U)
        prev = U
    return SpectralPath(np.asarray(path.times), np.array(lams), np.array(Us))


def sde_step_size(lam: np.ndarray, cap: float = 1e-3, floor: float = 1e-12) -> float:
    """min(cap, 0.1 * N * min_gap^2); raises CollisionError below the floor."""
    lam = np.sort(np.asarray(lam, dtype=float))
    N = len(lam)
    if N < 2:
        return cap
    g = float(np.min(np.diff(lam)))
    if g < floor:
        raise CollisionError(f"eigenvalue gap {g:.3e} below collision floor {floor:g}")
    return min(cap, 0.1 * N * g * g)


def _orthonormalize(U: np.ndarray) -> np.ndarray:
    # QR with positive diag(R) is Gram-Schmidt on the columns
    Q, R = np.linalg.qr(U)
    s = np.sign(np.diagonal(R, axis1=-2, axis2=-1))
    s = np.where(s == 0, 1.0, s)
    return Q * s[..., None, :]


def eigenvector_sde(
    U0,
    lam_path,
    t_final: float,
    rng: np.random.Generator,
    replicas: int = 1,
    lam_times=None,
    cap: float = 1e-3,
    noise: bool = True,
    record=None,
):
    """Euler-Maruyama for the eigenvector SDE driven by a frozen eigenvalue path.

    ``lam_path`` is either one eigenvalue vector (frozen in time) or an array of
    shape (T, N) holding the path at ``lam_times``; it is treated as piecewise
    constant. Columns are re-orthonormalized after every step. Returns an array of
    shape (replicas, N, N), or ``(times, snapshots)`` when ``record`` is a list of
    times to store.
    """
    lam_path = np.atleast_2d(np.asarray(lam_path, dtype=float))
    if lam_times is None:
        if lam_path.shape[0] != 1:
            raise ValueError("lam_times required for a time-dependent path")
        lam_times = np.array([0.0])
    lam_times = np.asarray(lam_times, dtype=float)
    N = lam_path.shape[1]
    U = np.broadcast_to(np.asarray(U0, dtype=float), (replicas, N, N)).copy()
    iu = np.triu_indices(N, 1)
    rec_t = sorted(record) if record is not None else []
    snaps = []
    breaks = [t for t in lam_times[1:] if 0 < t < t_final] + rec_t + [t_final]
    breaks = sorted(set(b for b in breaks if b <= t_final))
    t = 0.0
    for stop in breaks:
        while t < stop - 1e-15:
            j = int(np.searchsorted(lam_times, t, side="right")) - 1
            lam = lam_path[max(j, 0)]
            dt = min(sde_step_size(lam, cap), stop - t)
            D = lam[:, None] - lam[None, :]
            np.fill_diagonal(D, np.inf)
            inv = 1.0 / D  # inv[k, l] = 1/(lam_k - lam_l)
            A = np.zeros((replicas, N, N))
            if noise:
                dB = rng.standard_normal((replicas, len(iu[0]))) * np.sqrt(dt)
                Bm = np.zeros((replicas, N, N))
                Bm[:, iu[0], iu[1]] = dB
                Bm = Bm + np.swapaxes(Bm, 1, 2)
                # A[l, k] = dB_kl / (sqrt(N) (lam_k - lam_l))
                A = np.swapaxes(Bm * inv[None], 1, 2) / np.sqrt(N)
            drift = -dt / (2.0 * N) * np.sum(inv * inv, axis=1)
            A = A + np.eye(N) * drift
            U = _orthonormalize(U + U @ A)
            t += dt
        if stop in rec_t:
            snaps.append(U.copy())
    if record is not None:
        return np.array(rec_t), snaps
    return U
