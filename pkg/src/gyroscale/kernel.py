"""Core geometry: the rotation filter, cylindrical velocities, fields and initial data.

The fast gyration generated by ``v x M`` with ``M = 2*pi*e1`` is a rotation of
the (e2, e3) velocity plane by angle ``2*pi*s/eps``.  Everything else in the
package is expressed through the rotation matrix ``r(tau)`` defined here.

All functions are vectorized: scalars and arrays of phases broadcast against
arrays of vectors whose last axis has length 3.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

TWO_PI = 2.0 * np.pi

#: The fixed vector M = 2 pi e1 carrying the strong magnetic field direction.
M_VECTOR = np.array([TWO_PI, 0.0, 0.0])

#: Generator of the rotation group: r'(tau) = 2 pi J r(tau).
J_MATRIX = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]])


def canonical_tau(tau):
    """Return the representative of ``tau`` modulo 1 in ``[0, 1)``."""
    t = np.mod(tau, 1.0)
    # mod can round up to exactly 1.0 for tiny negative inputs
    return np.where(t >= 1.0, 0.0, t)


def rotation(tau):
    """Rotation matrix r(tau) about e1 by angle ``2*pi*tau``.

    Parameters
    ----------
    tau : float or array_like
        Fast phase.  Arrays produce a stack of matrices of shape
        ``tau.shape + (3, 3)``.

    Returns
    -------
    numpy.ndarray
        ``r(tau)`` with first row and column ``(1, 0, 0)``.
    """
    tau = np.asarray(tau, dtype=float)
    c = np.cos(TWO_PI * tau)
    s = np.sin(TWO_PI * tau)
    out = np.zeros(tau.shape + (3, 3))
    out[..., 0, 0] = 1.0
    out[..., 1, 1] = c
    out[..., 1, 2] = -s
    out[..., 2, 1] = s
    out[..., 2, 2] = c
    return out


def _rotate(tau, v):
    tau = np.asarray(tau, dtype=float)
    v = np.asarray(v, dtype=float)
    c = np.cos(TWO_PI * tau)
    s = np.sin(TWO_PI * tau)
    shape = np.broadcast_shapes(tau.shape, v.shape[:-1])
    out = np.empty(shape + (3,))
    out[..., 0] = v[..., 0]
    out[..., 1] = c * v[..., 1] - s * v[..., 2]
    out[..., 2] = s * v[..., 1] + c * v[..., 2]
    return out


def ucar(tau, v):
    """Co-rotating velocity ``u = r(tau) v``."""
    return _rotate(tau, v)


def ucar_inv(tau, u):
    """Inverse filter ``v = r(-tau) u``."""
    return _rotate(-np.asarray(tau, dtype=float), u)


def cart_to_cyl(v):
    """Split Cartesian velocities into ``(v_par, v_perp, alpha)``.

    ``alpha`` lies in ``[0, 2*pi)``; when ``v2 = v3 = 0`` it is set to 0.
    """
    v = np.asarray(v, dtype=float)
    v_par = v[..., 0].copy()
    v_perp = np.hypot(v[..., 1], v[..., 2])
    alpha = np.mod(np.arctan2(v[..., 2], v[..., 1]), TWO_PI)
    alpha = np.where(alpha >= TWO_PI, 0.0, alpha)
    alpha = np.where(v_perp == 0.0, 0.0, alpha)
    return v_par, v_perp, alpha


def cyl_to_cart(v_par, v_perp, alpha):
    """Inverse of :func:`cart_to_cyl`: ``(v_par, v_perp cos a, v_perp sin a)``."""
    v_par, v_perp, alpha = np.broadcast_arrays(
        np.asarray(v_par, float), np.asarray(v_perp, float), np.asarray(alpha, float)
    )
    out = np.empty(v_par.shape + (3,))
    out[..., 0] = v_par
    out[..., 1] = v_perp * np.cos(alpha)
    out[..., 2] = v_perp * np.sin(alpha)
    return out


def periodic_nodes(n, period):
    """Uniform nodes ``j*period/n`` for ``j = 0..n-1``."""
    return np.arange(n) * (period / n)


def _check_node_count(n, name):
    if int(n) != n or n < 4 or n % 2:
        raise ValueError(f"{name} must be an even integer >= 4, got {n!r}")


# ---------------------------------------------------------------------------
# Fields
# ---------------------------------------------------------------------------

#: Integer codes shared with the compiled and fallback flow kernels.
FIELD_CODES = {"zero": 0, "uniform": 1, "parallel_uniform": 1, "smooth_bounded": 2}
N_FIELD_PARAMS = 16


@dataclass(frozen=True)
class FieldConfig:
    """Closed-form time-independent external fields E(x), B(x).

    Families
    --------
    ``zero``
        ``E = B = 0``.
    ``uniform``
        Constant vectors ``E``, ``B``.
    ``parallel_uniform``
        ``E = E1 e1``, ``B = 0``.
    ``smooth_bounded``
        ``E_i = E0_i + a_i sin(k x_{i+1} + i) w(x)`` and
        ``B_i = B0_i + b_i cos(k x_{i+2} + i) w(x)`` with indices modulo 3 and
        the polynomial-decay envelope ``w(x) = 1 / (1 + |x|^2 / L^2)``.

    The fields are the same for every eps; the strong part ``M / eps`` is
    kept separate and handled exactly by the integrators.
    """

    family: str = "zero"
    E: tuple = (0.0, 0.0, 0.0)
    B: tuple = (0.0, 0.0, 0.0)
    e_amp: tuple = (0.0, 0.0, 0.0)
    b_amp: tuple = (0.0, 0.0, 0.0)
    wavenumber: float = 1.0
    envelope: float = 2.0

    def __post_init__(self):
        if self.family not in FIELD_CODES:
            raise ValueError(f"unknown field family {self.family!r}")
        if self.family == "zero":
            object.__setattr__(self, "E", (0.0, 0.0, 0.0))
            object.__setattr__(self, "B", (0.0, 0.0, 0.0))
        for name in ("E", "B", "e_amp", "b_amp"):
            vec = tuple(float(c) for c in getattr(self, name))
            if len(vec) != 3 or not np.all(np.isfinite(vec)):
                raise ValueError(f"field parameter {name} must be 3 finite numbers")
            object.__setattr__(self, name, vec)
        if self.family == "parallel_uniform":
            if self.E[1] != 0.0 or self.E[2] != 0.0 or any(self.B):
                raise ValueError("parallel_uniform fields take E = (E1, 0, 0) and B = 0")
        if not self.envelope > 0.0:
            raise ValueError("envelope length must be positive")

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def uniform(cls, E, B):
        return cls("uniform", E=tuple(E), B=tuple(B))

    @classmethod
    def parallel_uniform(cls, e1):
        return cls("parallel_uniform", E=(float(e1), 0.0, 0.0))

    @classmethod
    def smooth_bounded(cls, e_amp, b_amp, wavenumber=1.0, envelope=2.0, E=(0, 0, 0), B=(0, 0, 0)):
        return cls(
            "smooth_bounded", E=tuple(E), B=tuple(B), e_amp=tuple(e_amp),
            b_amp=tuple(b_amp), wavenumber=wavenumber, envelope=envelope,
        )

    @property
    def code(self):
        return FIELD_CODES[self.family]

    @property
    def is_zero(self):
        if self.family == "zero":
            return True
        amps = self.E + self.B
        if self.family == "smooth_bounded":
            amps = amps + self.e_amp + self.b_amp
        return not any(amps)

    def packed(self):
        """Parameter vector consumed by the flow kernels."""
        p = np.zeros(N_FIELD_PARAMS)
        p[0:3] = self.E
        p[3:6] = self.B
        p[6:9] = self.e_amp
        p[9:12] = self.b_amp
        p[12] = self.wavenumber
        p[13] = self.envelope
        return p

    def evaluate(self, x, t=0.0):
        """Return ``(E(x), B(x))`` as arrays shaped like ``x``.

        ``t`` is accepted for interface symmetry; all families are static.
        """
        x = np.asarray(x, dtype=float)
        E = np.broadcast_to(np.asarray(self.E), x.shape).copy()
        B = np.broadcast_to(np.asarray(self.B), x.shape).copy()
        if self.family == "smooth_bounded":
            k = self.wavenumber
            w = 1.0 / (1.0 + np.sum(x * x, axis=-1) / self.envelope**2)
            for i in range(3):
                E[..., i] += self.e_amp[i] * np.sin(k * x[..., (i + 1) % 3] + i) * w
                B[..., i] += self.b_amp[i] * np.cos(k * x[..., (i + 2) % 3] + i) * w
        return E, B

    def to_dict(self):
        return {
            "family": self.family, "E": list(self.E), "B": list(self.B),
            "e_amp": list(self.e_amp), "b_amp": list(self.b_amp),
            "wavenumber": self.wavenumber, "envelope": self.envelope,
        }


# ---------------------------------------------------------------------------
# Initial distributions
# ---------------------------------------------------------------------------

F0_FAMILIES = ("isotropic_gaussian", "anisotropic_gaussian", "gyro_modulated")


@dataclass(frozen=True)
class InitialDistribution:
    """Closed-form nonnegative initial datum f0(x, v) with analytic gradient.

    Families
    --------
    ``isotropic_gaussian``
        ``exp(-|x - x0|^2 / 2 sx^2) exp(-|v|^2 / 2 sv^2)``.  Setting
        ``sigma_x_perp`` (default ``sigma_x``) to ``inf`` removes the
        dependence on ``x2, x3``; such data are rotation-invariant under the
        full gyration, including its spatial displacement.
    ``anisotropic_gaussian``
        Axis-aligned Gaussian with per-axis widths ``sigma_x_axes``,
        ``sigma_v_axes`` and velocity drift ``v0``.
    ``gyro_modulated``
        The isotropic Gaussian times ``1 + a cos(k alpha)`` where ``alpha`` is
        the gyro-angle of ``v``.  ``|a| < 1`` keeps it positive.
    """

    family: str = "isotropic_gaussian"
    x0: tuple = (0.0, 0.0, 0.0)
    sigma_x: float = 1.0
    sigma_v: float = 1.0
    sigma_x_perp: float | None = None
    sigma_x_axes: tuple = (1.0, 1.0, 1.0)
    sigma_v_axes: tuple = (1.0, 1.0, 1.0)
    v0: tuple = (0.0, 0.0, 0.0)
    a: float = 0.0
    k: int = 1

    def __post_init__(self):
        if self.family not in F0_FAMILIES:
            raise ValueError(f"unknown f0 family {self.family!r}")
        object.__setattr__(self, "x0", tuple(float(c) for c in self.x0))
        object.__setattr__(self, "v0", tuple(float(c) for c in self.v0))
        object.__setattr__(self, "sigma_x_axes", tuple(float(c) for c in self.sigma_x_axes))
        object.__setattr__(self, "sigma_v_axes", tuple(float(c) for c in self.sigma_v_axes))
        if self.sigma_x_perp is None:
            object.__setattr__(self, "sigma_x_perp", float(self.sigma_x))
        widths = (self.sigma_x, self.sigma_v, self.sigma_x_perp) + self.sigma_x_axes + self.sigma_v_axes
        if not all(w > 0 for w in widths):
            raise ValueError("all Gaussian widths must be positive")
        if not abs(self.a) < 1.0:
            raise ValueError("modulation amplitude must satisfy |a| < 1")
        if int(self.k) != self.k or self.k < 0:
            raise ValueError("modulation frequency k must be a nonnegative integer")

    @classmethod
    def isotropic(cls, x0=(0, 0, 0), sigma_x=1.0, sigma_v=1.0, sigma_x_perp=None):
        return cls("isotropic_gaussian", x0=tuple(x0), sigma_x=sigma_x, sigma_v=sigma_v,
                   sigma_x_perp=sigma_x_perp)

    @classmethod
    def anisotropic(cls, x0=(0, 0, 0), sigma_x_axes=(1, 1, 1), sigma_v_axes=(1, 1, 1), v0=(0, 0, 0)):
        return cls("anisotropic_gaussian", x0=tuple(x0), sigma_x_axes=tuple(sigma_x_axes),
                   sigma_v_axes=tuple(sigma_v_axes), v0=tuple(v0))

    @classmethod
    def gyro_modulated(cls, a=0.5, k=1, x0=(0, 0, 0), sigma_x=1.0, sigma_v=1.0):
        return cls("gyro_modulated", x0=tuple(x0), sigma_x=sigma_x, sigma_v=sigma_v, a=a, k=k)

    def _x_widths(self):
        if self.family == "anisotropic_gaussian":
            return np.asarray(self.sigma_x_axes)
        return np.array([self.sigma_x, self.sigma_x_perp, self.sigma_x_perp])

    def _v_widths(self):
        if self.family == "anisotropic_gaussian":
            return np.asarray(self.sigma_v_axes)
        return np.full(3, float(self.sigma_v))

    def _v_shift(self):
        if self.family == "anisotropic_gaussian":
            return np.asarray(self.v0)
        return np.zeros(3)

    def __call__(self, x, v):
        """Evaluate f0 at broadcastable arrays of positions and velocities."""
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        dx = (x - np.asarray(self.x0)) / self._x_widths()
        dv = (v - self._v_shift()) / self._v_widths()
        out = np.exp(-0.5 * (np.sum(dx * dx, axis=-1) + np.sum(dv * dv, axis=-1)))
        if self.family == "gyro_modulated" and self.a != 0.0:
            out = out * (1.0 + self.a * np.cos(self.k * cart_to_cyl(v)[2]))
        return out

    def gradient(self, x, v):
        """Analytic ``(grad_x f0, grad_v f0)``.

        For the gyro-modulated family the angular factor is not differentiable
        on the axis ``v_perp = 0``; there its contribution is set to zero.
        """
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        x, v = np.broadcast_arrays(x, v)
        sx = self._x_widths()
        sv = self._v_widths()
        value = self(x, v)
        gx = -value[..., None] * (x - np.asarray(self.x0)) / sx**2
        gv = -value[..., None] * (v - self._v_shift()) / sv**2
        if self.family == "gyro_modulated" and self.a != 0.0:
            _, v_perp, alpha = cart_to_cyl(v)
            base = value / (1.0 + self.a * np.cos(self.k * alpha))
            safe = np.where(v_perp > 0.0, v_perp, 1.0)
            # d alpha / d v = (-v3, v2) / v_perp^2
            dmod = -self.a * self.k * np.sin(self.k * alpha) * base / safe**2
            dmod = np.where(v_perp > 0.0, dmod, 0.0)
            gv[..., 1] += dmod * (-v[..., 2])
            gv[..., 2] += dmod * v[..., 1]
        return gx, gv

    def to_dict(self):
        d = {"family": self.family, "x0": list(self.x0)}
        if self.family == "anisotropic_gaussian":
            d.update(sigma_x_axes=list(self.sigma_x_axes), sigma_v_axes=list(self.sigma_v_axes),
                     v0=list(self.v0))
        else:
            d.update(sigma_x=self.sigma_x, sigma_v=self.sigma_v, sigma_x_perp=self.sigma_x_perp)
            if self.family == "gyro_modulated":
                d.update(a=self.a, k=self.k)
        return d


def m_initial(f0, x, v_par, v_perp, n_alpha=64):
    """Gyro-average of f0 over the angle at fixed ``(x, v_par, v_perp)``.

    Parameters
    ----------
    f0 : InitialDistribution
    x : array_like, shape (..., 3)
    v_par, v_perp : array_like, shape (...)
    n_alpha : int
        Even number of uniform angle nodes (>= 4).

    Returns
    -------
    numpy.ndarray
        ``(1/2pi) int_0^{2pi} f0(x, cyl_to_cart(v_par, v_perp, a)) da`` by the
        equal-weight periodic rule.
    """
    _check_node_count(n_alpha, "n_alpha")
    x = np.asarray(x, dtype=float)
    alpha = periodic_nodes(n_alpha, TWO_PI)
    v = cyl_to_cart(np.asarray(v_par, float)[..., None], np.asarray(v_perp, float)[..., None], alpha)
    return np.mean(f0(x[..., None, :], v), axis=-1)


def fields_from_dict(d: Mapping):
    d = dict(d)
    return FieldConfig(**d)


def f0_from_dict(d: Mapping):
    d = dict(d)
    return InitialDistribution(**d)
