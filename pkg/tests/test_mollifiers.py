import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from deloclab import mollifiers as mol


def test_smoothstep_endpoints_and_flatness():
    assert mol.smoothstep(0.0) == 0 and mol.smoothstep(1.0) == 1
    assert mol.smoothstep(0.5) == pytest.approx(0.5)
    for d in (1, 2):
        assert mol.smoothstep(1e-12, d) == pytest.approx(0, abs=1e-9)
        assert mol.smoothstep(1 - 1e-12, d) == pytest.approx(0, abs=1e-9)
    assert mol.smoothstep(0.3, 5) == 720.0
    assert mol.smoothstep(0.3, 6) == 0.0


@pytest.mark.parametrize("d", [0, 1, 2, 3, 4])
def test_derivatives_match_finite_differences(d):
    t = np.linspace(0.05, 0.95, 19)
    h = 1e-6
    fd = (mol.smoothstep(t + h, d) - mol.smoothstep(t - h, d)) / (2 * h)
    assert np.allclose(fd, mol.smoothstep(t, d + 1), rtol=1e-6, atol=1e-4)


def test_plateaus_and_supports():
    assert mol.r_n(2.0, 3) == 1 and mol.r_n(2.5, 3) == 0 and 0 < mol.r_n(2.2, 3) < 1
    assert mol.f_E(-10.0, 0.3, 0.01) == 1 and mol.f_E(0.3, 0.3, 0.01) == 1
    assert mol.f_E(0.31, 0.3, 0.01) == 0 and mol.f_E(-11.0, 0.3, 0.01) == 0
    assert mol.chi_cut(1.0) == 1 and mol.chi_cut(-2.0) == 0 and mol.chi_cut(-1.5) == pytest.approx(0.5)
    assert mol.q_window(1.15, 1.0, 0.1) == 1 and mol.q_window(0.79, 1.0, 0.1) == 0
    assert mol.r_k(0.0, 1) == 1 and mol.r_k(1.0, 1) == 0
    L = np.log(100)
    assert mol.f_eps(2.1 * L, 0.1, 100) == 0 and mol.f_eps(2.2 * L, 0.1, 100) == 1


@settings(max_examples=100, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5))
def test_ramp_monotone(x, y):
    lo, hi = min(x, y), max(x, y)
    assert mol.ramp(lo, -1, 2) <= mol.ramp(hi, -1, 2)
    assert 0 <= mol.ramp(x, -1, 2) <= 1


def test_even_cutoffs_have_odd_derivative():
    s = np.array([1.3, 1.7])
    assert np.allclose(mol.chi_cut(-s, 1), -mol.chi_cut(s, 1))
    assert np.allclose(mol.chi_cut(-s, 2), mol.chi_cut(s, 2))


def test_q_window_derivative_constants():
    # sup |q^(k)| * w^k = 2^k sup |S^(k)|; S' peaks at 15/8, S'' at 10/sqrt(3),
    # S''' at 60 (t = 0, 1), S'''' at 360, S^(5) = 720
    consts = [2 * 15 / 8, 4 * 10 / np.sqrt(3), 8 * 60, 16 * 360, 32 * 720]
    x = np.linspace(-3, 3, 600001)
    for w in (0.5, 2.0):
        for k, c in enumerate(consts, start=1):
            got = np.max(np.abs(mol.q_window(x * w, 0.0, w, k))) * w**k
            assert got <= c * (1 + 1e-9)
            assert got >= c * (1 - 1e-3)
