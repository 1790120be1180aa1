"""Rotation group, velocity coordinates, field and datum families."""

import numpy as np
import pytest

from gyroscale.kernel import (
    TWO_PI,
    FieldConfig,
    InitialDistribution,
    canonical_tau,
    cart_to_cyl,
    cyl_to_cart,
    m_initial,
    rotation,
    ucar,
    ucar_inv,
)


def test_rotation_special_phases():
    np.testing.assert_allclose(rotation(0.0), np.eye(3), atol=1e-15)
    np.testing.assert_allclose(rotation(0.5), np.diag([1.0, -1.0, -1.0]), atol=1e-15)
    quarter = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]])
    np.testing.assert_allclose(rotation(0.25), quarter, atol=1e-15)


def test_rotation_is_exp_of_generator():
    # r(tau) = exp(2 pi tau J), J the generator of rotations about e1
    from scipy.linalg import expm

    J = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]])
    for tau in (0.1, 0.37, -1.3, 2.9):
        np.testing.assert_allclose(rotation(tau), expm(TWO_PI * tau * J), atol=1e-13)


def test_canonical_tau():
    np.testing.assert_allclose(canonical_tau(np.array([-0.25, 0.0, 1.0, 2.75])), [0.75, 0.0, 0.0, 0.75])


def test_ucar_examples():
    e1 = np.array([1.0, 0.0, 0.0])
    for tau in (0.0, 0.3, 0.77):
        np.testing.assert_allclose(ucar(tau, e1), e1, atol=1e-15)
    np.testing.assert_allclose(ucar(0.25, np.array([0.0, 1.0, 0.0])), [0.0, 0.0, 1.0], atol=1e-15)
    v = np.array([0.3, -1.2, 2.2])
    assert abs(np.linalg.norm(ucar(0.37, v)) - np.linalg.norm(v)) <= 1e-14
    np.testing.assert_allclose(ucar_inv(0.37, ucar(0.37, v)), v, atol=1e-14)


def test_ucar_broadcasts_phases_against_velocities():
    taus = np.array([0.0, 0.25, 0.5])
    v = np.array([1.0, 1.0, 0.0])
    out = ucar(taus, v)
    assert out.shape == (3, 3)
    np.testing.assert_allclose(out[2], [1.0, -1.0, 0.0], atol=1e-15)


def test_cart_to_cyl_examples():
    np.testing.assert_allclose(cart_to_cyl(np.array([1.0, 1.0, 0.0])), (1.0, 1.0, 0.0), atol=1e-15)
    np.testing.assert_allclose(cart_to_cyl(np.array([0.0, 0.0, 2.0])), (0.0, 2.0, np.pi / 2), atol=1e-15)
    # angle convention on the axis
    assert cart_to_cyl(np.array([3.0, 0.0, 0.0]))[2] == 0.0


def test_cyl_round_trip_1000(rng):
    v = rng.normal(size=(1000, 3)) * 3.0
    vp, vq, al = cart_to_cyl(v)
    assert np.all(vq > 1e-6) and np.all((al >= 0) & (al < TWO_PI))
    np.testing.assert_allclose(cyl_to_cart(vp, vq, al), v, atol=1e-12)


def test_m_initial_isotropic_is_angle_free():
    f0 = InitialDistribution.isotropic()
    x = np.array([0.2, -0.1, 0.4])
    ref = f0(x, cyl_to_cart(0.3, 1.1, 0.0))
    assert abs(m_initial(f0, x, 0.3, 1.1) - ref) <= 1e-15


def test_m_initial_drops_first_harmonic():
    mod = InitialDistribution.gyro_modulated(a=0.5, k=1)
    plain = InitialDistribution.isotropic()
    x = np.array([0.2, -0.1, 0.4])
    assert abs(m_initial(mod, x, 0.3, 1.1) - m_initial(plain, x, 0.3, 1.1)) <= 1e-15


def test_m_initial_trigonometric_exactness():
    f0 = InitialDistribution.gyro_modulated(a=0.5, k=3)
    x = np.array([0.2, -0.1, 0.4])
    assert abs(m_initial(f0, x, 0.3, 1.1, n_alpha=32) - m_initial(f0, x, 0.3, 1.1, n_alpha=256)) <= 1e-12


def test_m_initial_rejects_odd_node_count():
    with pytest.raises(ValueError):
        m_initial(InitialDistribution.isotropic(), np.zeros(3), 0.0, 1.0, n_alpha=7)


@pytest.mark.parametrize("fields", [
    FieldConfig.zero(),
    FieldConfig.uniform((0.3, 0.1, 0.0), (0.0, 0.2, 0.1)),
    FieldConfig.parallel_uniform(0.3),
    FieldConfig.smooth_bounded((0.3, 0.3, 0.3), (0.2, 0.2, 0.2), E=(0.2, 0.3, -0.2), B=(0.3, 0.1, 0.2)),
])
def test_fields_finite_and_bounded(fields, rng):
    x = rng.normal(size=(500, 3)) * 10 ** rng.uniform(-2, 6, size=(500, 1))
    E, B = fields.evaluate(x)
    assert np.all(np.isfinite(E)) and np.all(np.isfinite(B))
    bound = np.abs(fields.E).sum() + np.abs(fields.e_amp).sum() + np.abs(fields.B).sum() + np.abs(fields.b_amp).sum()
    assert np.abs(E).max() + np.abs(B).max() <= bound + 1e-12


def test_smooth_fields_decay_to_background():
    f = FieldConfig.smooth_bounded((0.3, 0.3, 0.3), (0.2, 0.2, 0.2), E=(0.2, 0.3, -0.2), B=(0.3, 0.1, 0.2))
    E, B = f.evaluate(np.array([[1e8, -1e8, 1e8]]))
    np.testing.assert_allclose(E[0], f.E, atol=1e-12)
    np.testing.assert_allclose(B[0], f.B, atol=1e-12)


def test_field_validation():
    with pytest.raises(ValueError):
        FieldConfig("bogus")
    with pytest.raises(ValueError):
        FieldConfig("parallel_uniform", E=(0.3, 0.1, 0.0))
    with pytest.raises(ValueError):
        FieldConfig("uniform", E=(np.nan, 0.0, 0.0))
    assert FieldConfig.zero().is_zero
    assert not FieldConfig.parallel_uniform(0.3).is_zero


def test_datum_validation():
    with pytest.raises(ValueError):
        InitialDistribution("bogus")
    with pytest.raises(ValueError):
        InitialDistribution.gyro_modulated(a=1.0)
    with pytest.raises(ValueError):
        InitialDistribution.isotropic(sigma_x=-1.0)


@pytest.mark.parametrize("f0", [
    InitialDistribution.isotropic(x0=(0.1, 0.0, -0.2), sigma_x=0.8, sigma_v=1.3),
    InitialDistribution.anisotropic(x0=(0.1, -0.2, 0.3), sigma_x_axes=(1.0, 0.8, 1.2),
                                    sigma_v_axes=(1.0, 0.7, 1.3), v0=(0.2, 0.1, -0.1)),
    InitialDistribution.gyro_modulated(a=0.5, k=2, sigma_x=0.7),
])
def test_datum_gradient_matches_central_differences(f0, rng):
    x = rng.normal(size=(20, 3))
    v = rng.normal(size=(20, 3))
    gx, gv = f0.gradient(x, v)
    h = 1e-6
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        np.testing.assert_allclose(gx[:, i], (f0(x + e, v) - f0(x - e, v)) / (2 * h), atol=1e-8)
        np.testing.assert_allclose(gv[:, i], (f0(x, v + e) - f0(x, v - e)) / (2 * h), atol=1e-8)


def test_datum_nonnegative_and_decaying(rng):
    f0 = InitialDistribution.gyro_modulated(a=0.9, k=1)
    x = rng.normal(size=(1000, 3)) * 3
    v = rng.normal(size=(1000, 3)) * 3
    assert np.all(f0(x, v) >= 0.0)
    assert f0(np.full(3, 40.0), np.full(3, 40.0)) == 0.0


def test_flat_perpendicular_datum_ignores_x_perp():
    f0 = InitialDistribution.isotropic(sigma_x_perp=np.inf)
    v = np.array([0.3, 0.2, -0.5])
    assert f0(np.array([0.1, 0.0, 0.0]), v) == f0(np.array([0.1, 7.0, -3.0]), v)
