"""Sample clouds and discrete norms."""

import numpy as np
import pytest

from gyroscale.cloud import cloud_norm, make_cloud, make_cyl_cloud, profile_norm
from gyroscale.kernel import InitialDistribution

F0 = InitialDistribution.isotropic(sigma_x=0.8, sigma_v=1.2)


@pytest.mark.parametrize("tag", ["gauss-weighted", "low-discrepancy-box"])
def test_regeneration_is_bit_identical(tag):
    a = make_cloud(tag, 256, F0, 42)
    b = make_cloud(tag, 256, F0, 42)
    assert np.array_equal(a.points, b.points) and np.array_equal(a.weights, b.weights)
    assert np.all(a.weights > 0) and np.all(np.isfinite(a.weights))
    assert not np.array_equal(a.points, make_cloud(tag, 256, F0, 43).points)


def test_norm_examples(rng):
    c = make_cloud("gauss-weighted", 512, F0, 1)
    assert cloud_norm(np.zeros(512), c) == 0.0
    f = rng.normal(size=512)
    for k in (-3.0, 0.5, 1e5):
        assert cloud_norm(k * f, c) == pytest.approx(abs(k) * cloud_norm(f, c), rel=1e-14)
    with pytest.raises(ValueError):
        cloud_norm(np.ones(511), c)


def exact_gaussian_norm(f0):
    # int exp(-|y|^2 / s^2) dy over R^3 = (pi s^2)^(3/2), once for x and once for v
    return np.sqrt((np.pi * f0.sigma_x**2) ** 1.5 * (np.pi * f0.sigma_v**2) ** 1.5)


def test_gauss_weighted_refinement():
    norms = {}
    for n in (2**16, 2**18):
        c = make_cloud("gauss-weighted", n, F0, 42)
        norms[n] = cloud_norm(F0(c.x, c.v), c)
    assert abs(norms[2**16] - norms[2**18]) <= 1e-2 * norms[2**18]
    assert norms[2**18] == pytest.approx(exact_gaussian_norm(F0), rel=1e-2)


def test_box_cloud_integrates_the_gaussian():
    # f0^2 has widths sigma / sqrt(2), so 2.5 widths hold 3.5 of its deviations
    c = make_cloud("low-discrepancy-box", 2**16, F0, 42, half_width=2.5)
    assert cloud_norm(F0(c.x, c.v), c) == pytest.approx(exact_gaussian_norm(F0), rel=1e-2)


@pytest.mark.parametrize("tag", ["gauss-weighted", "low-discrepancy-box"])
def test_cylindrical_measure(tag):
    # the v_perp measure integrates exp(-v_perp^2) v_perp over [0, inf) to 1/2 per 2 pi
    c = make_cyl_cloud(tag, 2**15, F0, 42)
    vals = F0(c.x, np.column_stack([c.v_par, c.v_perp, np.zeros(c.size)]))
    expect = np.sqrt(exact_gaussian_norm(F0) ** 2 / (2 * np.pi))
    assert cloud_norm(vals, c) == pytest.approx(expect, rel=2e-2)
    assert np.all(c.v_perp >= 0)


def test_profile_norm_reduces_to_scalar_norm(rng):
    c = make_cloud("gauss-weighted", 256, F0, 3)
    f = rng.normal(size=256)
    assert profile_norm(np.repeat(f[:, None], 8, axis=1), c) == pytest.approx(cloud_norm(f, c), rel=1e-14)
    with pytest.raises(ValueError):
        profile_norm(np.ones((255, 8)), c)


def test_spread_time_widens_positions_only():
    a = make_cloud("gauss-weighted", 64, F0, 5)
    b = make_cloud("gauss-weighted", 64, F0, 5, spread_time=0.5)
    assert np.array_equal(a.v, b.v)
    ratio = np.sqrt(0.8**2 + (0.5 * 1.2) ** 2) / 0.8
    np.testing.assert_allclose(b.x, a.x * ratio, rtol=1e-12)


def test_half_cloud():
    c = make_cloud("gauss-weighted", 64, F0, 5)
    h = c.half()
    assert h.size == 32 and np.array_equal(h.weights, 2 * c.weights[:32])


def test_invalid_cloud_requests():
    with pytest.raises(ValueError):
        make_cloud("gauss-weighted", 100, F0, 1)
    with pytest.raises(ValueError):
        make_cloud("uniform", 64, F0, 1)
