import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import goe_matrix
from deloclab.linalg import (
    EigenConvergenceError,
    Spectrum,
    eigh,
    fix_signs,
    matrix_hash,
    resolvent_qform,
    stieltjes,
)
from deloclab.semicircle import m_sc


def _bisect_eigs(M, lo=-50.0, hi=50.0, iters=80):
    """Eigenvalues by bisection on the number of negative pivots of M - x I.

    Counts sign changes through an LDL^T style elimination (Sylvester inertia),
    independent of any eigensolver.
    """
    N = len(M)

    def n_below(x):
        A = M - x * np.eye(N)
        count = 0
        A = A.copy()
        for k in range(N):
            p = A[k, k]
            if p == 0:
                p = 1e-300
            if p < 0:
                count += 1
            A[k + 1 :, k + 1 :] -= np.outer(A[k + 1 :, k], A[k, k + 1 :]) / p
        return count

    out = []
    for j in range(N):
        a, b = lo, hi
        for _ in range(iters):
            m = 0.5 * (a + b)
            if n_below(m) > j:
                b = m
            else:
                a = m
        out.append(0.5 * (a + b))
    return np.array(out)


@pytest.mark.parametrize("backend", ["lapack", "householder"])
def test_two_by_two(backend):
    a, b = 0.7, -1.3
    S = eigh(np.array([[a, b], [b, a]]), backend=backend)
    assert np.allclose(S.lam, [a - abs(b), a + abs(b)], atol=1e-14)


@pytest.mark.parametrize("backend", ["lapack", "householder"])
def test_identity(backend):
    S = eigh(np.eye(5), backend=backend)
    assert np.allclose(S.lam, 1)
    assert np.allclose(S.U.T @ S.U, np.eye(5), atol=1e-14)
    assert np.array_equal(fix_signs(S.U), S.U)


@pytest.mark.parametrize("backend", ["lapack", "householder"])
def test_against_bisection_oracle(rng, backend):
    A = rng.standard_normal((8, 8))
    M = A + A.T
    ref = _bisect_eigs(M)
    assert np.allclose(eigh(M, backend=backend).lam, ref, atol=1e-10)


@pytest.mark.parametrize("cplx", [False, True])
def test_backends_agree(rng, cplx):
    N = 40
    A = rng.standard_normal((N, N))
    if cplx:
        A = A + 1j * rng.standard_normal((N, N))
    M = (A + A.conj().T) / 2
    S1, S2 = eigh(M), eigh(M, backend="householder")
    assert np.allclose(S1.lam, S2.lam, atol=1e-11)
    assert np.allclose(S1.U, S2.U, atol=1e-8)
    assert np.allclose(S2.reconstruct(), M, atol=1e-11)


def test_sign_convention(rng):
    S = eigh(goe_matrix(30, rng))
    piv = S.U[np.argmax(np.abs(S.U), axis=0), np.arange(30)]
    assert np.all(piv > 0)


def test_non_finite_rejected():
    M = np.eye(3)
    M[0, 1] = M[1, 0] = np.nan
    with pytest.raises(ValueError, match="sha256"):
        eigh(M)


def test_iteration_cap_reports_hash(rng):
    M = goe_matrix(20, rng)
    with pytest.raises(EigenConvergenceError) as exc:
        eigh(M, backend="householder", max_iter=0)
    assert matrix_hash(M) in str(exc.value)


def test_resolvent_examples(rng):
    d = np.array([0.5, -1.0, 2.0])
    S = eigh(np.diag(d))
    q = np.array([1.0, 0, 0])
    z = 0.1 + 0.3j
    assert resolvent_qform(S, q, z) == pytest.approx(1 / (0.5 - z))
    T = eigh(goe_matrix(12, rng))
    assert resolvent_qform(T, T.U[:, 4], z) == pytest.approx(1 / (T.lam[4] - z))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.floats(-3, 3), st.floats(1e-4, 5))
def test_resolvent_herglotz(seed, E, eta):
    r = np.random.default_rng(seed)
    S = eigh(goe_matrix(6, r))
    q = r.standard_normal(6)
    q /= np.linalg.norm(q)
    assert resolvent_qform(S, q, complex(E, eta)).imag > 0


def test_stieltjes_examples(rng):
    assert stieltjes(np.array([0.0]), 1j) == pytest.approx(1j)
    assert stieltjes(eigh(np.eye(4)), 2j) == pytest.approx(1 / (1 - 2j))
    M = goe_matrix(200, rng)
    m = stieltjes(eigh(M), 0.05j)
    assert abs(m.imag - m_sc(0.05j).imag) <= 0.25 * m_sc(0.05j).imag


def test_spectrum_overlaps(rng):
    S = eigh(goe_matrix(10, rng))
    q = rng.standard_normal(10)
    q /= np.linalg.norm(q)
    assert S.overlaps(q).sum() == pytest.approx(1.0)
    assert isinstance(S, Spectrum) and S.N == 10
