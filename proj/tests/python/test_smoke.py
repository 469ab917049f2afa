"""Smoke tests for the python bindings."""

import math

import numpy as np
import pytest

import grasslab as gl


def test_version():
    assert gl.__version__ == "0.1.0"


def test_subspace_and_metrics():
    e = gl.Subspace.coordinate(4, 2)
    assert e.n == 4 and e.k == 2
    f = gl.haar_sample(4, 2, seed=3)
    frame = np.asarray(f.frame)
    assert frame.shape == (4, 2)
    gram = frame.T @ frame
    assert np.allclose(gram, np.eye(2), atol=1e-10)
    d = gl.metric_d(e, f)
    s = gl.sigma_inf(e, f)
    assert s <= d + 1e-9 <= math.sqrt(2) * s + 2e-9
    angles = gl.principal_angles(e, f)
    assert len(angles) == 2
    assert abs(2 * math.sin(max(angles) / 2) - d) < 1e-12


def test_haar_sampling_is_seed_deterministic():
    a = gl.haar_sample(5, 2, seed=11)
    b = gl.haar_sample(5, 2, seed=11)
    assert a.digest() == b.digest()
    c = gl.haar_sample(5, 2, seed=12)
    assert a.digest() != c.digest()


def test_ball_sample_lands_inside():
    e = gl.Subspace.coordinate(4, 1)
    for seed in range(5):
        f = gl.ball_sample(e, 0.4, metric="d", seed=seed)
        assert gl.metric_d(e, f) <= 0.4 * (1 + 1e-9)


def test_measures_and_sampling():
    mu = gl.measure("cube(3)")
    assert mu.dim == 3
    pts = mu.sample(5000, seed=1)
    assert pts.shape == (5000, 3)
    cov = np.cov(pts.T)
    assert np.allclose(cov, np.eye(3), atol=0.08)
    assert mu.density(np.zeros(3)) == pytest.approx((2 * 3**0.5) ** -3)
    prod = gl.product(mu, gl.measure("gaussian(2)"))
    assert prod.dim == 5
    assert "product" in prod.descriptor()


def test_rotation_mapping_carries_subspace():
    e = gl.haar_sample(5, 2, seed=1)
    f = gl.haar_sample(5, 2, seed=2)
    u = np.asarray(gl.rotation_mapping(e, f))
    image = gl.Subspace.from_span(u @ np.asarray(e.frame))
    assert gl.sigma_inf(image, f) < 1e-8


def test_isotropic_constants():
    est = gl.isotropic_constant(gl.measure("gaussian(4)"), seed=5)
    assert est["value"] == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-6)
    est = gl.isotropic_constant(gl.measure("cube(4)"), seed=6)
    assert est["value"] == pytest.approx(1 / math.sqrt(12), abs=1e-6)


def test_zq_support_isotropy():
    mu = gl.measure("lp_ball(2, 3)")
    y = np.array([0.6, 0.0, 0.8])
    est = gl.zq_support(mu, 2.0, y, n=100000, seed=7)
    assert est["value"] == pytest.approx(1.0, abs=4 * est["stderr"])


def test_marginal_density_at_zero_exact_route():
    mu = gl.measure("cube(2)")
    e1 = gl.Subspace.coordinate(2, 1)
    est = gl.marginal_density_at_zero(mu, e1, seed=8)
    assert est["stderr"] == 0.0
    assert est["value"] == pytest.approx(1 / (2 * 3**0.5), abs=1e-12)


def test_neighborhood_search_accepts_and_is_deterministic():
    mu = gl.measure("cube(8)")
    center = gl.Subspace.coordinate(8, 1)
    r1 = gl.neighborhood_search(mu, center, epsilon=0.3, seed=42,
                                n_samples=10000)
    r2 = gl.neighborhood_search(mu, center, epsilon=0.3, seed=42,
                                n_samples=10000, workers=3)
    assert r1["accepted"]
    assert r1["distance"] < 0.3
    assert r1["L"] + 2 * r1["L_stderr"] < r1["threshold"]
    assert [t["digest"] for t in r1["trials"]] == [
        t["digest"] for t in r2["trials"]
    ]
