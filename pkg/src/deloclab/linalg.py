"""Dense symmetric / Hermitian eigendecomposition and resolvent evaluation.

Two backends are available. ``"lapack"`` calls ``numpy.linalg.eigh`` and is the
default. ``"householder"`` runs a self-contained Householder tridiagonalization
followed by implicit-shift QL, and serves as a cross-check and a fallback
without LAPACK. Both return the same :class:`Spectrum` up to the sign/phase
convention, which is applied afterwards.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Spectrum",
    "EigenConvergenceError",
    "eigh",
    "eigvalsh",
    "resolvent_qform",
    "stieltjes",
    "matrix_hash",
    "fix_signs",
]


class EigenConvergenceError(RuntimeError):
    """Raised when the QL iteration exceeds its iteration cap."""

    def __init__(self, msg: str, digest: str):
        super().__init__(f"{msg} (matrix sha256 {digest})")
        self.digest = digest


def matrix_hash(M: np.ndarray) -> str:
    """Short sha256 digest of the matrix bytes, used in failure diagnostics."""
    a = np.ascontiguousarray(M)
    return hashlib.sha256(a.tobytes() + str(a.shape).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class Spectrum:
    """Ascending eigenvalues ``lam`` and eigenvectors in the columns of ``U``."""

    lam: np.ndarray
    U: np.ndarray

    @property
    def N(self) -> int:
        return len(self.lam)

    def overlaps(self, q) -> np.ndarray:
        """Squared overlaps |<q, u_i>|^2 for all i."""
        q = np.asarray(q)
        return np.abs(self.U.conj().T @ q) ** 2

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.lam) @ self.U.conj().T


def fix_signs(U: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude entry of each column real and positive.

    Ties go to the lowest row index (``argmax`` semantics). Complex columns are
    rotated by a phase; real columns are multiplied by -1 where needed.
    """
    U = np.array(U, copy=True)
    if U.size == 0:
        return U
    # round before argmax so that exact ties survive float noise
    mag = np.round(np.abs(U), 12)
    idx = np.argmax(mag, axis=0)
    piv = U[idx, np.arange(U.shape[1])]
    if np.iscomplexobj(U):
        a = np.abs(piv)
        phase = np.where(a > 0, piv / np.where(a > 0, a, 1.0), 1.0)
        U = U * phase.conj()[None, :]
        U[idx, np.arange(U.shape[1])] = a  # exact realness of the pivot
    else:
        U = U * np.where(piv < 0, -1.0, 1.0)[None, :]
    return U


def _tridiagonalize(A: np.ndarray):
    """Householder reduction A = Q T Q^T of a real symmetric matrix."""
    A = np.array(A, dtype=float, copy=True)
    n = A.shape[0]
    Q = np.eye(n)
    for k in range(n - 2):
        x = A[k + 1 :, k]
        nx = np.linalg.norm(x)
        if nx == 0.0:
            continue
        alpha = -np.copysign(nx, x[0])
        v = x.copy()
        v[0] -= alpha
        nv = np.linalg.norm(v)
        if nv == 0.0:
            continue
        v /= nv
        A[k + 1 :, :] -= 2.0 * np.outer(v, v @ A[k + 1 :, :])
        A[:, k + 1 :] -= 2.0 * np.outer(A[:, k + 1 :] @ v, v)
        Q[:, k + 1 :] -= 2.0 * np.outer(Q[:, k + 1 :] @ v, v)
    d = np.diag(A).copy()
    e = np.zeros(n)
    if n > 1:
        e[: n - 1] = np.diag(A, 1)
    return d, e, Q


def _tql(d: np.ndarray, e: np.ndarray, Z: np.ndarray, max_iter: int, digest: str):
    """Implicit-shift QL on a tridiagonal matrix, rotating the columns of Z.

    ``e[i]`` couples ``d[i]`` and ``d[i+1]``; ``e[n-1]`` is ignored.
    """
    n = len(d)
    eps = np.finfo(float).eps
    e = e.copy()
    e[n - 1] = 0.0
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= eps * dd:
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > max_iter:
                raise EigenConvergenceError(
                    f"QL iteration did not converge for eigenvalue {l}", digest
                )
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = np.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + np.copysign(r, g))
            s = c = 1.0
            p = 0.0
            underflow = False
            for i in range(m - 1, l - 1, -1):
                f = s * e[i]
                b = c * e[i]
                r = np.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                zi1 = Z[:, i + 1].copy()
                Z[:, i + 1] = s * Z[:, i] + c * zi1
                Z[:, i] = c * Z[:, i] - s * zi1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return d, Z


def _householder_real(M: np.ndarray, max_iter: int):
    digest = matrix_hash(M)
    if M.shape[0] == 0:
        return np.zeros(0), np.zeros((0, 0))
    d, e, Q = _tridiagonalize(M)
    lam, U = _tql(d, e, Q, max_iter, digest)
    order = np.argsort(lam, kind="stable")
    return lam[order], U[:, order]


def _householder_complex(M: np.ndarray, max_iter: int):
    # Real embedding [[A, -B], [B, A]] doubles every eigenvalue; for a pair
    # (x, y) in the eigenspace, x + iy is an eigenvector of A + iB.
    n = M.shape[0]
    A, B = M.real, M.imag
    R = np.block([[A, -B], [B, A]])
    lam2, V = _householder_real(R, max_iter)
    lam = lam2[0::2]
    W = V[:n, :] + 1j * V[n:, :]
    U = np.empty((n, n), dtype=complex)
    for j in range(n):
        # either column of the pair works unless it is degenerate; pick the larger
        c0, c1 = W[:, 2 * j], W[:, 2 * j + 1]
        c = c0 if np.linalg.norm(c0) >= np.linalg.norm(c1) else c1
        U[:, j] = c / np.linalg.norm(c)
    # re-orthonormalize within (rare) numerically degenerate clusters
    U, _ = np.linalg.qr(U)
    Hu = U.conj().T @ M @ U
    lam = np.real(np.diag(Hu))
    order = np.argsort(lam, kind="stable")
    return lam[order], U[:, order]


def eigh(M, backend: str = "lapack", max_iter: int = 60) -> Spectrum:
    """Eigendecomposition of a real symmetric or complex Hermitian matrix.

    Eigenvalues are ascending. Columns of ``U`` follow the sign convention of
    :func:`fix_signs`. Non-finite input raises ``ValueError``.
    """
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("eigh expects a square matrix")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"non-finite entries (matrix sha256 {matrix_hash(M)})")
    cplx = np.iscomplexobj(M) and np.any(M.imag != 0)
    if not cplx:
        M = np.real(M).astype(float)
    if backend == "lapack":
        try:
            lam, U = np.linalg.eigh(M)
        except np.linalg.LinAlgError as exc:
            raise EigenConvergenceError(str(exc), matrix_hash(M)) from exc
    elif backend == "householder":
        if cplx:
            lam, U = _householder_complex(M, max_iter)
        else:
            lam, U = _householder_real(M, max_iter)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return Spectrum(lam=np.asarray(lam, dtype=float), U=fix_signs(U))


def eigvalsh(M) -> np.ndarray:
    """Ascending eigenvalues only (LAPACK)."""
    return np.linalg.eigvalsh(np.asarray(M))


def resolvent_qform(S: Spectrum, q, z) -> complex:
    """<q, (M - z)^{-1} q> evaluated spectrally."""
    z = complex(z)
    if z.imag <= 0:
        raise ValueError("resolvent_qform requires Im z > 0")
    w = S.overlaps(q)
    return complex(np.sum(w / (S.lam - z)))


def stieltjes(S: Spectrum | np.ndarray, z):
    """Empirical Stieltjes transform (1/N) sum_i 1/(lambda_i - z).

    Accepts a :class:`Spectrum` or a bare eigenvalue array; ``z`` may be an array.
    """
    lam = S.lam if isinstance(S, Spectrum) else np.asarray(S, dtype=float)
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag <= 0):
        raise ValueError("stieltjes requires Im z > 0")
    out = np.mean(1.0 / (lam[:, None] - z.reshape(-1)[None, :]), axis=0)
    return out.reshape(z.shape) if z.shape else complex(out[0])
