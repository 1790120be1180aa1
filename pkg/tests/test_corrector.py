"""First-order corrector: formula, gradients, centering and the convention choice."""

import numpy as np
import pytest

from gyroscale.corrector import (
    GradientSpec,
    corrector_from_gradients,
    corrector_kernel_part,
    corrector_l,
    corrector_l_centered,
    grad_G,
    grad_G_perp,
)
from gyroscale.decomposition import two_scale_decompose
from gyroscale.dynamics import IntegratorSpec
from gyroscale.kernel import TWO_PI, FieldConfig, InitialDistribution, ucar
from gyroscale.projections import tau_ker_project

from oracles import rotation_matrix

FINE = GradientSpec(fd_step=1e-5)


def hand_corrector(tau, x, v, fields, f0, convention):
    """Corrector at t = 0 (where G = f0) from written-out matrices and analytic gradients."""
    D = rotation_matrix(tau + 0.25) - rotation_matrix(0.25)
    u = rotation_matrix(tau) @ v
    E, B = fields.evaluate(x[None])
    gx, gu = f0.gradient(x, u)
    force = D @ E[0] + np.cross(u, D @ B[0])
    if convention == "literal":
        return (D @ v)[1:] @ gx[1:] + force[1:] @ gu[1:]
    return ((D @ v)[1:] @ gx[1:] + force @ gu) / TWO_PI


@pytest.mark.parametrize("convention", ["literal", "consistent"])
def test_formula_against_hand_evaluation(convention, fields_uniform, f0_aniso):
    x = np.array([0.3, -0.2, 0.5])
    v = np.array([0.4, 1.0, -0.7])
    for tau in (0.3, 0.5, 0.81):
        got = corrector_l(0.0, tau, x, v, fields_uniform, f0_aniso, gspec=FINE, convention=convention)
        assert got == pytest.approx(hand_corrector(tau, x, v, fields_uniform, f0_aniso, convention), abs=1e-8)


def test_spec_point_zero_fields():
    f0 = InitialDistribution.isotropic()
    got = corrector_l(0.0, 0.5, np.zeros(3), np.array([0.0, 1.0, 0.0]), FieldConfig.zero(), f0, gspec=FINE)
    assert abs(got - hand_corrector(0.5, np.zeros(3), np.array([0.0, 1.0, 0.0]), FieldConfig.zero(), f0,
                                    "literal")) <= 1e-8


@pytest.mark.parametrize("convention", ["literal", "consistent"])
def test_vanishes_at_phase_zero(convention, fields_smooth, f0_gyro, rng):
    x = rng.normal(size=(10, 3))
    v = rng.normal(size=(10, 3))
    got = corrector_l(0.3, 0.0, x, v, fields_smooth, f0_gyro, convention=convention)
    assert np.abs(got).max() <= 1e-15


@pytest.mark.parametrize("convention", ["literal", "consistent"])
def test_vanishes_for_axis_only_datum(convention, rng):
    f0 = InitialDistribution.anisotropic(sigma_x_axes=(1.0, np.inf, np.inf), sigma_v_axes=(1.0, np.inf, np.inf))
    x = rng.normal(size=(10, 3))
    v = rng.normal(size=(10, 3))
    got = corrector_l(0.3, rng.uniform(0, 1, 10), x, v, FieldConfig.zero(), f0, convention=convention)
    assert np.abs(got).max() == 0.0


def test_gradient_at_time_zero_matches_analytic(f0_aniso, fields_smooth, rng):
    x = rng.normal(size=(10, 3))
    u = rng.normal(size=(10, 3))
    gx, gu = grad_G_perp(0.0, x, u, fields_smooth, f0_aniso, gspec=GradientSpec(fd_step=1e-4))
    ax, au = f0_aniso.gradient(x, u)
    np.testing.assert_allclose(gx[:, 1:], ax[:, 1:], atol=1e-6)
    np.testing.assert_allclose(gu[:, 1:], au[:, 1:], atol=1e-6)
    assert np.all(gx[:, 0] == 0) and np.all(gu[:, 0] == 0)


def test_gradient_step_sweep(f0_aniso, fields_smooth, rng):
    x = rng.normal(size=(10, 3))
    u = rng.normal(size=(10, 3))
    ax, au = f0_aniso.gradient(x, u)
    errs = []
    for h in (1e-1, 1e-3, 1e-5, 1e-9):
        gx, gu = grad_G(0.0, x, u, fields_smooth, f0_aniso, gspec=GradientSpec(fd_step=h))
        errs.append(max(np.abs(gx - ax).max(), np.abs(gu - au).max()))
    # truncation dominates on the left, rounding on the right
    assert min(errs) <= 1e-6
    assert errs[0] > min(errs) and errs[-1] > min(errs)


def test_symmetric_datum_has_no_perpendicular_gradient(rng):
    f0 = InitialDistribution.isotropic(sigma_x_perp=np.inf)
    x = rng.normal(size=(10, 3))
    u = rng.normal(size=(10, 3))
    gx, _ = grad_G_perp(0.4, x, u, FieldConfig.zero(), f0)
    assert np.abs(gx).max() == 0.0


def test_analytic_gradient_path_matches_differences(f0_aniso, rng):
    fields = FieldConfig.parallel_uniform(0.3)
    x = rng.normal(size=(10, 3))
    u = rng.normal(size=(10, 3))
    a = grad_G(0.4, x, u, fields, f0_aniso, gspec=GradientSpec("analytic-when-available"))
    d = grad_G(0.4, x, u, fields, f0_aniso, gspec=GradientSpec("central-fd", 1e-5))
    for ga, gd in zip(a, d):
        np.testing.assert_allclose(ga, gd, atol=1e-8)


def test_gradient_spec_validation():
    with pytest.raises(ValueError):
        GradientSpec(method="complex-step")
    with pytest.raises(ValueError):
        GradientSpec(fd_step=0.0)
    with pytest.raises(ValueError):
        corrector_from_gradients(0.1, np.ones(3), np.zeros(3), np.zeros(3), np.ones(3), np.ones(3), "other")


@pytest.mark.parametrize("convention", ["literal", "consistent"])
def test_centered_corrector_is_in_the_range(convention, fields_smooth, f0_gyro, rng):
    x = rng.normal(size=3)
    t = 0.3
    lc = lambda tau, w: corrector_l_centered(t, tau, np.broadcast_to(x, np.shape(w)), w, fields_smooth, f0_gyro,
                                             convention=convention)
    tau = rng.uniform(0, 1, 8)
    v = rng.normal(size=(8, 3))
    assert np.abs(tau_ker_project(lc, tau, v, 64)).max() <= 1e-8
    # direct 64-node average along one characteristic
    s = np.arange(64) / 64
    along = lc(tau[0] + s, ucar(-s, v[0]))
    assert abs(along.mean()) <= 1e-8


def test_centered_corrector_of_zero_is_zero(rng):
    f0 = InitialDistribution.isotropic(sigma_x_perp=np.inf)
    x = rng.normal(size=(5, 3))
    v = rng.normal(size=(5, 3))
    assert np.abs(corrector_l_centered(0.3, 0.4, x, v, FieldConfig.zero(), f0)).max() == 0.0


def test_kernel_part_is_characteristic_average(fields_smooth, f0_gyro, rng):
    x = rng.normal(size=3)
    v = rng.normal(size=3)
    kp = corrector_kernel_part(0.3, 0.2, x, v, fields_smooth, f0_gyro, n_tau=64)
    s = np.arange(64) / 64
    direct = corrector_l(0.3, 0.2 + s, np.broadcast_to(x, (64, 3)), ucar(-s, v), fields_smooth, f0_gyro)
    assert kp == pytest.approx(direct.mean(), abs=1e-12)


def test_consistent_convention_captures_the_fast_oscillation(fields_smooth, f0_aniso, rng):
    # with the consistent corrector the micro remainder h vanishes like eps;
    # with the literal formula an O(1) fast oscillation is left over.  Fine
    # substeps keep the integrator error below the O(eps) signal.
    x = rng.normal(size=(6, 3)) * 0.7
    v = rng.normal(size=(6, 3))
    spec = IntegratorSpec(substeps_per_gyroperiod=64)
    h = {}
    for conv in ("consistent", "literal"):
        h[conv] = [np.abs(two_scale_decompose(0.3, x, v, eps, fields_smooth, f0_aniso, spec, n_sigma=16,
                                              convention=conv, freeze_tol=np.inf).h_profile).max()
                   for eps in (0.02, 0.01)]
    assert h["consistent"][0] / h["consistent"][1] >= 1.6
    assert h["literal"][1] >= 0.5 * h["literal"][0]
    assert h["literal"][1] >= 20 * h["consistent"][1]
