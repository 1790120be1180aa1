"""Gyro-angle and fast-phase projectors, antiderivatives and the integration link."""

import numpy as np
import pytest

from gyroscale.kernel import TWO_PI, cart_to_cyl, periodic_nodes, ucar
from gyroscale.projections import (
    ImageConditionError,
    PeriodicProfile,
    alpha_antiderivative,
    alpha_fluct,
    alpha_project,
    antiderivative_along_characteristic,
    tau_antiderivative,
    tau_im_callable,
    tau_im_part,
    tau_integrate_respects_split,
    tau_ker_project,
    tau_ker_project_corotating,
    tau_operator,
)


def prof(func, n=32):
    return PeriodicProfile.sample(func, n, "alpha")


def test_alpha_project_examples():
    assert alpha_project(prof(lambda a: np.full_like(a, 2.5))) == pytest.approx(2.5, abs=1e-15)
    assert abs(alpha_project(prof(np.cos))) <= 1e-14
    assert abs(alpha_project(prof(lambda a: np.cos(a) ** 2)) - 0.5) <= 1e-14


def test_alpha_fluct_examples():
    assert np.abs(alpha_fluct(prof(lambda a: np.full_like(a, 3.0))).values).max() <= 1e-15
    a = periodic_nodes(32, TWO_PI)
    np.testing.assert_allclose(alpha_fluct(prof(np.cos)).values, np.cos(a), atol=1e-15)
    np.testing.assert_allclose(alpha_fluct(prof(lambda t: 2 + np.sin(3 * t))).values, np.sin(3 * a), atol=1e-14)


def test_alpha_antiderivative_examples():
    a = periodic_nodes(32, TWO_PI)
    np.testing.assert_allclose(alpha_antiderivative(prof(np.cos)).values, np.sin(a), atol=1e-14)
    np.testing.assert_allclose(alpha_antiderivative(prof(np.sin)).values, -np.cos(a), atol=1e-14)


def test_alpha_antiderivative_finite_difference_order():
    errs = []
    for n in (64, 128):
        p = alpha_antiderivative(prof(lambda a: np.sin(2 * a), n)).values
        h = TWO_PI / n
        fd = (np.roll(p, -1) - np.roll(p, 1)) / (2 * h)
        errs.append(np.abs(fd - np.sin(2 * periodic_nodes(n, TWO_PI))).max())
    assert errs[0] <= 1e-2
    assert errs[0] / errs[1] >= 3.5


def test_alpha_antiderivative_rejects_mean():
    with pytest.raises(ImageConditionError) as info:
        alpha_antiderivative(prof(lambda a: 1.0 + np.cos(a)))
    assert info.value.kernel_norm == pytest.approx(1.0)


def test_profile_validation():
    with pytest.raises(ValueError):
        PeriodicProfile(np.ones(7))
    with pytest.raises(ValueError):
        PeriodicProfile(np.array([1.0, np.nan, 0.0, 1.0]))
    with pytest.raises(ValueError):
        PeriodicProfile(np.ones(8), "beta")
    with pytest.raises(ValueError):
        alpha_project(PeriodicProfile(np.ones(8), "tau"))


def test_batched_profiles():
    a = periodic_nodes(16, TWO_PI)
    vals = np.stack([1.0 + np.cos(a), 2.0 + np.sin(2 * a)])
    p = PeriodicProfile(vals)
    np.testing.assert_allclose(alpha_project(p), [1.0, 2.0], atol=1e-15)


def speed2(tau, v):
    return np.sum(np.asarray(v) ** 2, axis=-1)


def v2(tau, v):
    return np.asarray(v)[..., 1] + 0.0 * np.asarray(tau)


def cos_v2(tau, v):
    return np.cos(TWO_PI * np.asarray(tau)) * np.asarray(v)[..., 1]


def test_tau_ker_project_examples():
    v = np.array([0.3, -1.1, 0.8])
    assert tau_ker_project(speed2, 0.2, v) == pytest.approx(v @ v, abs=1e-13)
    assert abs(tau_ker_project(v2, 0.2, v)) <= 1e-14
    assert tau_ker_project(cos_v2, 0.0, np.array([0.0, 1.0, 0.0]), n_tau=256) == pytest.approx(0.5, abs=1e-14)


def test_tau_ker_project_product_to_sum(rng):
    tau = rng.uniform(0, 1, 20)
    v = rng.normal(size=(20, 3))
    expect = 0.5 * ucar(tau, v)[:, 1]
    np.testing.assert_allclose(tau_ker_project(cos_v2, tau, v, n_tau=256), expect, atol=1e-13)


def test_tau_im_part_examples():
    v = np.array([0.3, -1.1, 0.8])
    assert abs(tau_im_part(speed2, 0.3, v)) <= 1e-13
    c = lambda tau, w: np.cos(TWO_PI * np.asarray(tau)) + 0.0 * np.asarray(w)[..., 0]
    assert tau_im_part(c, 0.3, v) == pytest.approx(np.cos(TWO_PI * 0.3), abs=1e-14)
    g = lambda tau, w: cos_v2(tau, w) + speed2(tau, w)
    assert abs(tau_ker_project(tau_im_callable(g, 128), 0.3, v, 128)) <= 1e-10


def test_kernel_projection_depends_on_u_only(rng):
    g = lambda tau, w: np.sin(TWO_PI * tau) * w[..., 2] + np.cos(2 * TWO_PI * tau) * w[..., 1] ** 2
    v = rng.normal(size=(30, 3))
    tau = rng.uniform(0, 1, 30)
    shift = rng.uniform(-3, 3, 30)
    a = tau_ker_project(g, tau, v)
    b = tau_ker_project(g, tau + shift, ucar(-shift, v))
    assert np.abs(a - b).max() <= 1e-12


def test_corotating_route_matches_characteristic_average(rng):
    g = lambda tau, w: (np.cos(TWO_PI * tau + 0.3) * w[..., 1] * w[..., 2]
                        + np.sin(2 * TWO_PI * tau) * w[..., 2] + w[..., 0] ** 2)
    tau = rng.uniform(0, 1, 10)
    v = rng.normal(size=(10, 3))
    np.testing.assert_allclose(tau_ker_project_corotating(g, tau, v, 32), tau_ker_project(g, tau, v, 32), atol=1e-12)


def test_tau_antiderivative_examples(rng):
    c = lambda tau, w: np.cos(TWO_PI * np.asarray(tau)) + 0.0 * np.asarray(w)[..., 0]
    for tau in (0.0, 0.3, 0.71):
        assert tau_antiderivative(c, tau, np.array([0.1, 0.2, 0.3])) == pytest.approx(
            np.sin(TWO_PI * tau) / TWO_PI, abs=1e-14)
    # h = v2: the hand solution, re-centered by its mean along the characteristic
    tau = rng.uniform(0, 1, 10)
    v = rng.normal(size=(10, 3))

    def raw(t, w):
        return (w[..., 1] * np.sin(TWO_PI * t) + w[..., 2] * (np.cos(TWO_PI * t) - 1.0)) / TWO_PI

    s = np.arange(256) / 256
    along = raw(tau[:, None] + s, np.einsum("sij,pj->psi", np.stack([
        np.array([[1, 0, 0], [0, np.cos(TWO_PI * q), np.sin(TWO_PI * q)],
                  [0, -np.sin(TWO_PI * q), np.cos(TWO_PI * q)]]) for q in s]), v))
    expect = raw(tau, v) - along.mean(axis=1)
    np.testing.assert_allclose(tau_antiderivative(v2, tau, v, n_tau=128), expect, atol=1e-13)
    op = tau_operator(lambda t, w: tau_antiderivative(v2, t, w, 128), tau, v, step=1e-4)
    np.testing.assert_allclose(op, v[:, 1], atol=1e-6)


def test_tau_antiderivative_operator_residual(rng):
    h = tau_im_callable(lambda tau, w: np.cos(TWO_PI * tau) * w[..., 1] * w[..., 2]
                        + np.sin(TWO_PI * tau) * w[..., 0], 128)
    tau = rng.uniform(0, 1, 50)
    v = rng.normal(size=(50, 3))
    k = lambda t, w: tau_antiderivative(h, t, w, 128)
    np.testing.assert_allclose(tau_operator(k, tau, v, 1e-4), h(tau, v), atol=1e-6)


def test_tau_antiderivative_rejects_kernel_input():
    with pytest.raises(ImageConditionError):
        tau_antiderivative(speed2, 0.1, np.array([0.3, 1.0, 0.0]))
    with pytest.raises(ImageConditionError):
        antiderivative_along_characteristic(np.ones((2, 8)))


def test_integration_respects_split_examples():
    c = lambda tau, w: np.cos(TWO_PI * np.asarray(tau)) + 0.0 * np.asarray(w)[..., 0]
    a, b = tau_integrate_respects_split(speed2, c, np.zeros(3), 0.3, 1.2)
    assert a <= 1e-12 and b <= 1e-12
    rot2 = lambda tau, w: ucar(tau, w)[..., 1]
    a, _ = tau_integrate_respects_split(rot2, c, np.zeros(3), 0.3, 1.2)
    assert a <= 1e-12
    rot2sq = lambda tau, w: ucar(tau, w)[..., 1] ** 2
    a, b = tau_integrate_respects_split(rot2sq, tau_im_callable(cos_v2, 128), np.zeros(3), 0.3, 1.2,
                                        n_tau=128, n_alpha=128)
    assert a <= 1e-8 and b <= 1e-8


def test_integration_split_rejects_wrong_inputs():
    with pytest.raises(ValueError):
        tau_integrate_respects_split(v2, cos_v2, np.zeros(3), 0.3, 1.2)
    with pytest.raises(ValueError):
        tau_integrate_respects_split(speed2, speed2, np.zeros(3), 0.3, 1.2)


def test_cylindrical_angle_of_rotated_velocity(rng):
    # r(tau) advances the gyro-angle by 2 pi tau
    v = rng.normal(size=(10, 3))
    tau = rng.uniform(0, 1, 10)
    da = (cart_to_cyl(ucar(tau, v))[2] - cart_to_cyl(v)[2]) % TWO_PI
    np.testing.assert_allclose(np.minimum(da, TWO_PI - da), np.minimum(TWO_PI * tau, TWO_PI * (1 - tau)), atol=1e-12)
