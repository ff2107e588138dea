import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from conftest import goe_matrix
from deloclab import mollifiers as mol
from deloclab.linalg import eigh
from deloclab.regularization import (
    QuadratureError,
    RegParams,
    _kernel_C,
    audit_json,
    counting_function,
    event_check,
    finite_diff,
    free_energy,
    hat,
    hs_F,
    hs_F_quadrature,
    hs_regularized_eigenvalue,
    hs_window,
    observable_T,
    regularized_projection,
    sandwich_slacks,
    smoothed_threshold_S,
)
from deloclab.semicircle import classical_locations


def test_params_validation():
    with pytest.raises(ValueError):
        RegParams(0.1, 0.2, 0.01, 0.02, 0.001, 0.001)
    with pytest.raises(ValueError):
        RegParams(0.1, 0.01, 0.03, 0.02, 0.001, 0.001)
    p = RegParams.hierarchy(0.1)
    assert p.eps1 < p.delta2 < p.eps2 < p.delta1
    assert p.beta_for(100) == pytest.approx(100**0.1)


def test_counting_function():
    lam = np.array([-1.0, 0.0, 2.0])
    assert counting_function(lam, -5.0) == 0
    assert counting_function(lam, 3.0) == 3
    assert counting_function(lam, 1.0) == 2
    with pytest.raises(ValueError):
        counting_function(lam, -11.0)


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
@pytest.mark.parametrize("tau", [-60.0, -3.2, -0.4, 0.0, 0.37, 0.99, 1.6, 7.0, 39.0, 41.0, 300.0])
def test_kernel_against_quad(tau):
    S2 = lambda t: mol.smoothstep(t, 2)
    h = lambda u: abs(u) * np.arctan2(1.0, abs(u))
    pts = [tau] if 0 < tau < 1 else None
    ref = quad(lambda t: S2(t) * h(tau - t), 0, 1, points=pts, epsabs=1e-14, epsrel=1e-13)[0] / np.pi
    assert _kernel_C(np.array([tau]))[0] == pytest.approx(ref, abs=1e-12)


def test_spectral_F_matches_quadrature(rng):
    lam = np.sort(rng.uniform(-2, 2, 12))
    eta1 = 0.02
    for E in (lam[4] - 0.005, 0.5 * (lam[6] + lam[7])):
        spec = hs_F(lam, E, eta1)[0]
        direct = hs_F_quadrature(lam, E, eta1, panels=8, n_gl=16)["F"]
        assert spec == pytest.approx(direct, abs=1e-6)


def test_F_counts_away_from_eigenvalues():
    lam = np.array([-1.5, -0.5, 0.4, 1.3])
    for E, n in [(-1.0, 1), (0.0, 2), (0.9, 3), (1.8, 4)]:
        assert hs_F(lam, E, 0.01)[0] == pytest.approx(n, abs=0.02)


def test_window():
    w = hs_window(200, 100, 0.1, 0.02)
    off = int(np.ceil(1.5 * 200 ** (0.02 / 3)))
    assert (w.j, w.k) == (100 - off, 100 + off)
    assert w.lo < w.hi
    assert w.eta1 == pytest.approx(200 ** (-2 / 3 - 0.1) * 100 ** (-1 / 3))
    with pytest.raises(ValueError):
        hs_window(10, 11, 0.1, 0.02)


def test_rigid_spectrum_closeness():
    N, delta, eps = 80, 0.1, 0.02
    g = classical_locations(N)
    for i in range(1, N + 1):
        lt = hs_regularized_eigenvalue(g, i, delta, eps)
        bound = N ** (eps - delta) * N ** (-2 / 3) * hat(i, N) ** (-1 / 3)
        assert abs(lt - g[i - 1]) <= bound, i


def test_spectral_and_quadrature_routes_agree(rng):
    lam = np.linalg.eigvalsh(goe_matrix(30, rng))
    a = hs_regularized_eigenvalue(lam, 15, 0.1, 0.02, per_eta=1, n_gl=3)
    b = hs_regularized_eigenvalue(lam, 15, 0.1, 0.02, method="quadrature", per_eta=1, n_gl=3)
    assert a == pytest.approx(b, abs=1e-7)


def test_refinement_check(rng):
    lam = np.linalg.eigvalsh(goe_matrix(60, rng))
    val, info = hs_regularized_eigenvalue(lam, 30, 0.1, 0.02, check=True, return_info=True)
    assert abs(info["refined"] - val) <= 1e-6 * info["window"].eta1
    with pytest.raises(QuadratureError):
        hs_regularized_eigenvalue(lam, 30, 0.1, 0.02, per_eta=1, n_gl=1, check=True, tol=1e-16)


def test_projection_closed_form():
    N = 50
    d = classical_locations(N) - 0.01
    M = np.diag(d)
    p = RegParams.hierarchy(0.1)
    ell = 25
    q = np.zeros(N)
    q[ell - 1] = 1.0
    lo_half = N ** (-p.delta2) / (2 * N ** (2 / 3) * hat(ell, N) ** (1 / 3))
    eta = N ** (-p.eps2) / (N ** (2 / 3) * hat(ell, N) ** (1 / 3))
    v = regularized_projection(M, q, ell, p, lam_tilde=d[ell - 1], rtol=1e-11)
    assert v == pytest.approx(2 / np.pi * np.arctan(lo_half / eta), rel=1e-8)
    # off-site direction: exact arctan difference
    q2 = np.zeros(N)
    q2[ell] = 1.0
    c = d[ell - 1]
    ref = (np.arctan((c + lo_half - d[ell]) / eta) - np.arctan((c - lo_half - d[ell]) / eta)) / np.pi
    v2 = regularized_projection(M, q2, ell, p, lam_tilde=c, rtol=1e-11)
    assert v2 == pytest.approx(ref, rel=1e-6)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 20))
def test_projection_nonnegative(seed, ell):
    r = np.random.default_rng(seed)
    M = goe_matrix(20, r)
    q = r.standard_normal(20)
    q /= np.linalg.norm(q)
    assert regularized_projection(M, q, ell, RegParams.hierarchy(0.1)) >= 0


def test_T_isolated_and_clones():
    N = 40
    S = eigh(np.diag(classical_locations(N)))
    q = np.ones(N) / np.sqrt(N)
    p2 = RegParams.hierarchy(0.1, k=2, nu=0.2)
    t = observable_T(S, q, 20, p2)
    assert t.chi == 1.0 and t.T == pytest.approx(N * t.v)
    # two exact clones of lambda_tilde_20 inside the plateau
    lt = {19: 0.0, 20: 0.0, 21: 0.0}
    t = observable_T(S, q, 20, p2, lam_tilde=lt)
    assert t.F >= 2 and t.chi == 0.0 and t.T == 0.0


def test_free_energy():
    assert free_energy(np.full(7, 1.3), 2.0) == pytest.approx(1.3 + np.log(7) / 2)
    assert free_energy([4.2], 10.0) == 4.2
    assert free_energy([1e5, 0.0], 1.0) == pytest.approx(1e5)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=2, max_size=40), st.floats(0.1, 20))
def test_entropy_gap(w, beta):
    a = free_energy(w, beta)
    assert max(w) - 1e-9 <= a <= max(w) + np.log(len(w)) / beta + 1e-9


def test_smoothed_threshold():
    N, eps, beta = 100, 0.2, 50.0
    L = np.log(N)
    below = np.full(N, 1.0)
    assert smoothed_threshold_S(below, eps, beta) == 0
    above = np.r_[np.zeros(N - 1), 3 * L]
    assert smoothed_threshold_S(above, eps, beta) == 1
    vals = [smoothed_threshold_S(np.r_[np.zeros(N - 1), x * L], eps, beta) for x in (2.2, 2.3, 2.35)]
    assert 0 < vals[1] < 1 and vals[0] < vals[1] < vals[2]


def test_event_check_rigid_diag():
    N = 60
    g = classical_locations(N)
    q = np.zeros(N)
    q[0] = 1.0
    rep = event_check(np.diag(g), q, RegParams.hierarchy(0.1), grid=(9, 5), grid_entrywise=(3, 3), check_small=False)
    assert rep.rigidity_margin == 0.0
    assert rep.deloc_margin == pytest.approx(N ** (1 - rep.omega))


def test_event_check_planted_double():
    N = 60
    lam = classical_locations(N).copy()
    lam[29] = lam[30] - 1e-9
    p = RegParams.hierarchy(0.1, k=1)
    q = np.ones(N) / np.sqrt(N)
    rep = event_check(np.diag(lam), q, p, ell=30, grid=(9, 5), grid_entrywise=(3, 3), check_small=False)
    assert rep.b3_count == 2 and rep.flags["B3"] is False and not rep.all_pass


def test_sandwich_keys(rng):
    M = goe_matrix(40, rng)
    q = np.ones(40) / np.sqrt(40)
    out = sandwich_slacks(M, q, 20, RegParams.hierarchy(0.1, k=1))
    assert out["upper_slack"] > out["lower_slack"] > 0
    assert out["v"] >= 0


def test_finite_diff_examples(rng):
    M = goe_matrix(5, rng)
    assert finite_diff(lambda X: X[1, 3], M, 1, 3) == pytest.approx(1.0)
    assert finite_diff(lambda X: X[1, 3], M, 1, 3, order=2) == pytest.approx(0.0, abs=1e-6)
    D = np.diag([0.0, 1.0, 2.5])
    assert finite_diff(lambda X: np.linalg.eigvalsh(X)[1], D, 1, 1) == pytest.approx(1.0)
    # off-diagonal bump: first order change 2 u_a u_b
    S = eigh(M)
    ref = 2 * S.U[0, 2] * S.U[4, 2]
    assert finite_diff(lambda X: np.linalg.eigvalsh(X)[2], M, 0, 4, h=1e-4) == pytest.approx(ref, abs=1e-6)
    with pytest.raises(ValueError):
        finite_diff(lambda X: 0.0, M, 0, 0, order=4)


def test_audit_json(tmp_path):
    g = classical_locations(40)
    doc = audit_json(g, [1, 20], 0.1, 0.02, path=tmp_path / "a.json")
    assert json.loads((tmp_path / "a.json").read_text()) == doc
    assert all(r["pass"] for r in doc["rows"])
