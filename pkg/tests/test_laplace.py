import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import special_ortho_group

from gplaplace.errors import DimensionError, NumericalError
from gplaplace.laplace import (
    HessianSpectrum, clamp_eigenvalues, confidence_ellipse, eigenvalue_floor, hessian_at,
    hessian_fd, log_evidence_laplace, parameter_contributions, variant_r,
)
from gplaplace.model import PriorSpec, log_map

TWO_PI = 2 * math.pi


def spectrum(lams, seed=None):
    lams = np.asarray(lams, float)
    vec = None if seed is None else special_ortho_group.rvs(lams.size, random_state=seed)
    if lams.size == 1 and vec is not None:
        vec = np.eye(1)
    return HessianSpectrum.from_eigen(lams, vec)


# ---------------------------------------------------------------------------
# clamping

def test_clamp_examples():
    s = clamp_eigenvalues(spectrum([TWO_PI, 10.0]), 0.0)
    np.testing.assert_array_equal(s.eigenvalues, [TWO_PI, 10.0])
    assert s.clamped == 0
    s = clamp_eigenvalues(spectrum([1.0, 10.0]), 0.0)
    np.testing.assert_allclose(s.eigenvalues, [TWO_PI, 10.0])
    assert s.clamped == 1
    s = clamp_eigenvalues(spectrum([500.0]), -math.log(10))
    assert s.eigenvalues[0] == pytest.approx(628.3185307, rel=1e-9)
    s = clamp_eigenvalues(spectrum([-3.0]), -1.0)
    assert s.eigenvalues[0] == pytest.approx(TWO_PI * math.e**2, rel=1e-12)


def test_variant_r():
    assert variant_r("LapS", 10) == 0.0
    assert variant_r("LapAIC", 10) == -1.0
    assert variant_r("LapBIC", 10) == pytest.approx(-math.log(10))
    with pytest.raises(ValueError):
        variant_r("Lap", 10)


def test_evidence_examples():
    assert log_evidence_laplace(-4.0, spectrum([TWO_PI] * 3), "LapS", 10) == pytest.approx(-4.0, abs=1e-14)
    assert log_evidence_laplace(-4.0, spectrum([0.5, 1.0, 3.0]), "LapAIC", 10) == pytest.approx(-7.0, abs=1e-12)
    assert log_evidence_laplace(-4.0, spectrum([0.5, 1.0]), "LapBIC", 100) == pytest.approx(
        -4.0 - 9.2103404, abs=1e-6)
    assert log_evidence_laplace(-4.0, spectrum([0.0, 5.0]), "Lap", 10) is None
    assert log_evidence_laplace(-4.0, spectrum([TWO_PI, TWO_PI]), "Lap", 10) == pytest.approx(-4.0)


def test_contributions_nan_for_nonpositive():
    c = parameter_contributions([-1.0, 0.0, TWO_PI])
    assert np.isnan(c[0]) and np.isnan(c[1]) and c[2] == pytest.approx(0.0, abs=1e-15)


# ---------------------------------------------------------------------------
# properties over random spectra

spectra = st.lists(
    st.one_of(st.floats(-1e3, 1e6, allow_nan=False), st.floats(1e-8, 1.0)), min_size=1, max_size=8)


@settings(max_examples=300, deadline=None)
@given(spectra, st.integers(3, 10_000), st.floats(-50, 50))
def test_lemma_properties(lams, n, map_value):
    s = spectrum(lams)
    values = {}
    for v in ("LapS", "LapAIC", "LapBIC"):
        r = variant_r(v, n)
        c = clamp_eigenvalues(s, r)
        assert np.all(parameter_contributions(c.eigenvalues) <= r + 1e-12)
        again = clamp_eigenvalues(c, r)
        np.testing.assert_array_equal(again.eigenvalues, c.eigenvalues)
        values[v] = log_evidence_laplace(map_value, s, v, n)
    assert values["LapS"] >= values["LapAIC"] >= values["LapBIC"]
    assert values["LapS"] <= map_value + 1e-12


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.0, 1e4), min_size=1, max_size=8), st.floats(-2.0, 0.0))
def test_clamp_is_noop_above_floor(extra, r):
    lams = eigenvalue_floor(r) + np.asarray(extra)
    s = clamp_eigenvalues(spectrum(lams), r)
    np.testing.assert_array_equal(s.eigenvalues, lams)
    assert s.clamped == 0


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 8), st.integers(2, 500), st.floats(-100, 100), st.integers(0, 2**31))
def test_collapse_identities(u, n, map_value, seed):
    rng = np.random.default_rng(seed)
    lams = rng.uniform(-10.0, TWO_PI * 0.999, u)
    s = spectrum(lams)
    assert log_evidence_laplace(map_value, s, "LapS", n) == pytest.approx(map_value, abs=1e-10)
    assert log_evidence_laplace(map_value, s, "LapAIC", n) == pytest.approx(map_value - u, abs=1e-10)
    assert log_evidence_laplace(map_value, s, "LapBIC", n) == pytest.approx(
        map_value - u * math.log(n), abs=1e-10)


# ---------------------------------------------------------------------------
# Hessians

def test_hessian_of_quadratic():
    H = hessian_fd(lambda t: -0.5 * 3.7 * (t[0] - 1.2) ** 2, np.array([1.2]))
    assert H[0, 0] == pytest.approx(3.7, abs=1e-6)


def test_hessian_of_prior_only_objective():
    prior = PriorSpec([-0.2, -3.5, 0.8], [1.9, 3.6, 2.15])
    H = hessian_fd(prior.logpdf, prior.mean + 0.3)
    np.testing.assert_allclose(H, np.diag(1 / prior.std**2), atol=1e-4)


def test_hessian_nonfinite_entry_named():
    def f(t):
        return -np.inf if t[1] > 0 else -t @ t
    with pytest.raises(NumericalError, match=r"\(0, 1\)|\(1, 1\)"):
        hessian_fd(f, np.zeros(2))


def test_reconstruction(rng):
    for u in (2, 3, 5, 8):
        A = rng.normal(size=(u, u))
        s = HessianSpectrum.from_matrix(A + A.T)
        assert np.linalg.norm(s.reconstruct() - s.H) < 1e-8


def test_benchmark_hessian_matches_stencil_fit(linear, linear_suite, se_model):
    # oracle: quartic fits to 5-point stencils at a coarser step
    model, prior = se_model
    theta = linear_suite.fit_map.theta_hat.raw
    f = lambda t: log_map(model, prior, t, linear)
    H = hessian_at(model, prior, linear, theta).H
    h = 0.02
    k = np.arange(-2, 3)

    def curvature(direction):
        vals = [f(theta + kk * h * direction) for kk in k]
        return -2 * np.polyfit(k * h, vals, 4)[2]

    e = np.eye(2)
    for i in range(2):
        assert H[i, i] == pytest.approx(curvature(e[i]), rel=0.01)
    d = (e[0] + e[1])
    assert H[0, 0] + H[1, 1] + 2 * H[0, 1] == pytest.approx(curvature(d), rel=0.01)


# ---------------------------------------------------------------------------
# ellipses

def test_ellipse_axis_aligned():
    s = HessianSpectrum.from_matrix(np.diag([4.0, 1.0]))
    ell = confidence_ellipse(np.zeros(2), s, 2.0)
    order = np.argsort(ell.lengths)
    np.testing.assert_allclose(ell.lengths[order], [1.0, 2.0])
    np.testing.assert_allclose(np.abs(ell.axes[:, order]), np.eye(2), atol=1e-12)


def test_ellipse_circular_for_floor_spectrum():
    ell = confidence_ellipse(np.zeros(2), HessianSpectrum.from_matrix(TWO_PI * np.eye(2)), 2.0)
    np.testing.assert_allclose(ell.lengths, [0.7978845608, 0.7978845608], rtol=1e-9)


def test_rotated_ellipse_matches_point_cloud(rng):
    # oracle: PCA of points on the level set found by bisection along rays
    Q = special_ortho_group.rvs(2, random_state=3)
    H = Q @ np.diag([9.0, 0.7]) @ Q.T
    ell = confidence_ellipse(np.array([0.5, -1.0]), HessianSpectrum.from_matrix(H), 2.0)
    angles = np.linspace(0, 2 * np.pi, 2000, endpoint=False)
    pts = []
    for a in angles:
        v = np.array([np.cos(a), np.sin(a)])
        lo, hi = 0.0, 100.0
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if ell.contains(ell.center + mid * v)[0] else (lo, mid)
        pts.append(lo * v)
    pts = np.array(pts)
    far = np.max(np.linalg.norm(pts, axis=1))
    near = np.min(np.linalg.norm(pts, axis=1))
    np.testing.assert_allclose(sorted(ell.lengths), [near, far], rtol=0.01)
    lam, vec = np.linalg.eigh(np.cov(pts.T))
    major = ell.axes[:, np.argmax(ell.lengths)]
    assert abs(major @ vec[:, -1]) == pytest.approx(1.0, abs=0.01)


def test_ellipse_dimension_error():
    with pytest.raises(DimensionError):
        confidence_ellipse(np.zeros(3), HessianSpectrum.from_matrix(np.eye(3)))


def test_ellipse_coverage_weighted():
    ell = confidence_ellipse(np.zeros(2), HessianSpectrum.from_matrix(np.eye(2)), 1.0)
    pts = np.array([[0.0, 0.0], [5.0, 0.0]])
    assert ell.coverage(pts) == 0.5
    assert ell.coverage(pts, [3.0, 1.0]) == 0.75


# ---------------------------------------------------------------------------
# criteria suite arithmetic

def test_information_criteria_arithmetic(linear_suite):
    r = linear_suite
    assert r.aic == pytest.approx(2 * r.u - 2 * r.mll, abs=1e-12)
    assert r.bic == pytest.approx(r.u * math.log(r.n) - 2 * r.mll, abs=1e-12)
    assert r.logz_aic == pytest.approx(-r.aic / 2, abs=1e-12)
    assert r.logz_bic == pytest.approx(-r.bic / 2, abs=1e-12)
    assert r.score("AIC") == -r.aic
    # u = 2, L = -10 worked example
    assert 2 * 2 - 2 * -10.0 == 24 and -(2 * math.log(10) + 20) / 2 == pytest.approx(-12.303, abs=1e-3)


def test_benchmark_values(linear_suite):
    # frozen from this implementation (seed 1, 5 restarts)
    r = linear_suite
    assert r.mll == pytest.approx(-5.28701, abs=1e-4)
    assert r.map == pytest.approx(-9.17396, abs=1e-4)
    assert r.logz_laps == pytest.approx(-9.17396, abs=1e-4)
    assert r.logz_lapaic == pytest.approx(-11.17396, abs=1e-4)
    assert r.logz_lapbic == pytest.approx(-13.77913, abs=1e-4)
    assert r.logz_lap == pytest.approx(-8.1456, abs=1e-3)
    assert r.lap_pathological
    assert r.clamp_counts == {"LapS": 2, "LapAIC": 2, "LapBIC": 2}
