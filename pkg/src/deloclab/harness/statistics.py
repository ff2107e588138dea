"""Per-sample delocalization statistics."""

from __future__ import annotations

import numpy as np

from ..linalg import Spectrum

__all__ = ["gumbel_statistic", "deloc_statistics", "sup_entry_sq"]


def sup_entry_sq(S: Spectrum) -> float:
    """max over eigenvectors and coordinates of u_l(i)^2."""
    return float(np.max(np.abs(S.U) ** 2))


def gumbel_statistic(S: Spectrum) -> float:
    """(N max_l ||u_l||_inf^2 - 4 log N + log log N + log 2 pi) / 2.

    Its limiting law is standard Gumbel, P(x <= x0) -> exp(-exp(-x0)).
    """
    N = S.N
    if N < 3:
        raise ValueError("gumbel statistic needs N >= 3")
    x = N * sup_entry_sq(S) - 4 * np.log(N) + np.log(np.log(N)) + np.log(2 * np.pi)
    return float(x / 2.0)


def deloc_statistics(S: Spectrum, q=None) -> dict:
    """Sup-norm and isotropic statistics of one sample.

    Keys ending in ``_norm`` are divided by sqrt(log N / N) (NaN for N = 1).
    ``scaled_sup`` is N max_l ||u_l||_inf^2 / log N.
    """
    N = S.N
    A = np.abs(S.U)
    linf = A.max(axis=0)
    out = {
        "max_linf": float(linf.max()),
        "linf_edge": float(linf[0]),
        "linf_bulk": float(linf[(N - 1) // 2]),
    }
    if q is not None:
        q = np.asarray(q, dtype=float)
        if abs(np.linalg.norm(q) - 1) > 1e-10:
            raise ValueError("q must be a unit vector")
        out["sup_iso"] = float(np.max(np.abs(S.U.T @ q)))
    scale = np.sqrt(np.log(N) / N) if N > 1 else np.nan
    for key in list(out):
        out[key + "_norm"] = out[key] / scale if N > 1 else float("nan")
    out["scaled_sup"] = N * out["max_linf"] ** 2 / np.log(N) if N > 1 else float("nan")
    return out
