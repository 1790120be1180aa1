"""Property suite for the rotation group and the two projector pairs.

Each property is evaluated on seeded random cases and reported as
``(name, max_error, tolerance)``.  The suite backs the ``check`` subcommand.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernel import TWO_PI, cart_to_cyl, cyl_to_cart, rotation, ucar, ucar_inv
from .projections import (
    PeriodicProfile,
    alpha_antiderivative,
    alpha_fluct,
    alpha_project,
    spectral_derivative,
    tau_im_part,
    tau_ker_project,
    tau_ker_project_corotating,
)


@dataclass(frozen=True)
class PropertyResult:
    name: str
    error: float
    tolerance: float

    @property
    def passed(self):
        return bool(self.error <= self.tolerance)

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.name}: max error {self.error:.3e} (tol {self.tolerance:.0e})"


def random_tau_profile(seed, degree=2):
    """Smooth profile ``g(tau, v)`` with finitely many modes in ``(tau, alpha)``."""
    rng = np.random.default_rng(seed)
    coef = rng.normal(size=(2 * degree + 1, 2 * degree + 1))
    shift = rng.uniform(0.0, TWO_PI, size=coef.shape)

    def g(tau, v):
        v_par, v_perp, alpha = cart_to_cyl(np.asarray(v, dtype=float))
        tau = np.asarray(tau, dtype=float)
        out = 0.0
        for i, p in enumerate(range(-degree, degree + 1)):
            for j, q in enumerate(range(-degree, degree + 1)):
                out = out + coef[i, j] * np.cos(TWO_PI * p * tau + q * alpha + shift[i, j])
        return out * (1.0 + v_perp**2) * np.exp(-0.5 * v_par**2)

    return g


def random_alpha_profiles(rng, count, n=64, degree=8):
    """Trigonometric polynomials of the given degree sampled on ``n`` nodes."""
    alpha = TWO_PI * np.arange(n) / n
    k = np.arange(degree + 1)
    a = rng.normal(size=(count, degree + 1)) / (1.0 + k) ** 2
    b = rng.normal(size=(count, degree + 1)) / (1.0 + k) ** 2
    vals = a @ np.cos(np.outer(k, alpha)) + b @ np.sin(np.outer(k, alpha))
    return PeriodicProfile(vals, "alpha")


def geometry_properties(seed=0, cases=100):
    rng = np.random.default_rng(seed)
    tau = rng.uniform(-3.0, 3.0, cases)
    tau2 = rng.uniform(-3.0, 3.0, cases)
    v = rng.normal(size=(cases, 3)) * rng.uniform(0.1, 5.0, (cases, 1))
    R = rotation(tau)
    eye = np.eye(3)
    res = [
        PropertyResult("rotation periodicity r(tau+1) = r(tau)",
                       float(np.abs(rotation(tau + 1.0) - R).max()), 1e-12),
        PropertyResult("rotation transpose is inverse",
                       float(np.abs(np.einsum("nij,nkj->nik", R, R) - eye).max()), 1e-12),
        PropertyResult("rotation transpose equals r(-tau)",
                       float(np.abs(np.swapaxes(R, 1, 2) - rotation(-tau)).max()), 1e-12),
        PropertyResult("rotation determinant one", float(np.abs(np.linalg.det(R) - 1.0).max()), 1e-12),
        PropertyResult("rotation group law r(a) r(b) = r(a+b)",
                       float(np.abs(R @ rotation(tau2) - rotation(tau + tau2)).max()), 1e-12),
    ]
    u = ucar(tau, v)
    scale = np.maximum(1.0, np.linalg.norm(v, axis=1))
    res += [
        PropertyResult("ucar isometry",
                       float((np.abs(np.linalg.norm(u, axis=1) - np.linalg.norm(v, axis=1)) / scale).max()),
                       1e-12),
        PropertyResult("ucar fixes the axis component", float(np.abs(u[:, 0] - v[:, 0]).max()), 1e-12),
        PropertyResult("ucar_inv inverts ucar",
                       float((np.abs(ucar_inv(tau, u) - v).max(axis=1) / scale).max()), 1e-12),
    ]
    vp, vq, al = cart_to_cyl(v)
    res.append(PropertyResult("cylindrical round trip",
                              float((np.abs(cyl_to_cart(vp, vq, al) - v).max(axis=1) / scale).max()),
                              1e-12))
    return res


def alpha_properties(seed=0, cases=100, n=64):
    rng = np.random.default_rng(seed)
    prof = random_alpha_profiles(rng, cases, n)
    mean = alpha_project(prof)
    fl = alpha_fluct(prof)
    again = alpha_project(PeriodicProfile(np.broadcast_to(mean[:, None], prof.values.shape).copy(), "alpha"))
    p = alpha_antiderivative(fl)
    deriv = spectral_derivative(p.values, TWO_PI)
    return [
        PropertyResult("alpha_project idempotent", float(np.abs(again - mean).max()), 1e-10),
        PropertyResult("fluctuation is mean-free", float(np.abs(alpha_project(fl)).max()), 1e-10),
        PropertyResult("mean + fluctuation reassembles",
                       float(np.abs(mean[:, None] + fl.values - prof.values).max()), 1e-10),
        PropertyResult("antiderivative differentiates back", float(np.abs(deriv - fl.values).max()), 1e-10),
        PropertyResult("antiderivative has zero mean", float(np.abs(alpha_project(p)).max()), 1e-10),
    ]


def tau_properties(seed=0, cases=20, n_tau=32):
    rng = np.random.default_rng(seed)
    tau = rng.uniform(0.0, 1.0, 8)
    v = rng.normal(size=(8, 3))
    idem = ker = anni = equiv = 0.0
    for c in range(cases):
        g = random_tau_profile(seed * 1000 + c)
        pg = lambda t, w, g=g: tau_ker_project(g, t, w, n_tau)
        direct = tau_ker_project(g, tau, v, n_tau)
        idem = max(idem, float(np.abs(tau_ker_project(pg, tau, v, n_tau) - direct).max()))
        # same u = r(tau) v from shifted phases
        shifts = rng.uniform(-2.0, 2.0, 8)
        moved = tau_ker_project(g, tau + shifts, ucar(-shifts, v), n_tau)
        ker = max(ker, float(np.abs(moved - direct).max()))
        img = lambda t, w, g=g: tau_im_part(g, t, w, n_tau)
        anni = max(anni, float(np.abs(tau_ker_project(img, tau, v, n_tau)).max()))
        other = tau_ker_project_corotating(g, tau, v, n_tau)
        equiv = max(equiv, float(np.abs(other - direct).max()))
    return [
        PropertyResult("tau_ker_project idempotent", idem, 1e-10),
        PropertyResult("kernel projection depends on u only", ker, 1e-8),
        PropertyResult("kernel projection annihilates the range part", anni, 1e-10),
        PropertyResult("characteristic average equals co-rotating resample", equiv, 1e-10),
    ]


def property_suite(seed=0):
    """All properties, in a fixed order."""
    return geometry_properties(seed) + alpha_properties(seed) + tau_properties(seed)
