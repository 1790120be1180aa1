"""Weighted phase-space point sets and the discrete norms built on them.

Clouds come from scrambled Sobol sequences with a fixed seed, so
``(seed, tag, size)`` regenerates the same points bit for bit.

``gauss-weighted``
    Sobol points pushed through the inverse normal CDF and scaled to the
    widths of ``f0``; weights ``1 / (N p(z))`` with ``p`` the sampling density
    make ``sum w g^2`` an estimate of the L2 integral.
``low-discrepancy-box``
    Sobol points in the box ``center +- half_width * widths`` with equal
    weights ``volume / N``.

Cylindrical clouds over ``(x, v_par, v_perp)`` carry the measure
``v_perp dx dv_par dv_perp``; the gauss-weighted variant draws ``v_perp`` from a
Rayleigh law so the ``v_perp`` factor cancels in the weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc

_TINY = 2.0**-53


@dataclass(frozen=True)
class SampleCloud:
    """Points with positive quadrature weights.

    ``points`` has shape ``(N, 6)`` for Cartesian clouds (``x, v``) and
    ``(N, 5)`` for cylindrical ones (``x, v_par, v_perp``).
    """

    points: np.ndarray
    weights: np.ndarray
    tag: str
    cylindrical: bool = False

    @property
    def size(self):
        return self.weights.size

    @property
    def x(self):
        return self.points[:, :3]

    @property
    def v(self):
        return self.points[:, 3:6]

    @property
    def v_par(self):
        return self.points[:, 3]

    @property
    def v_perp(self):
        return self.points[:, 4]

    def half(self):
        """First half of the points with doubled weights (a coarser estimate)."""
        n = self.size // 2
        return SampleCloud(self.points[:n], 2.0 * self.weights[:n], self.tag, self.cylindrical)


def _sobol(dim, size, seed):
    m = int(round(np.log2(size)))
    if 2**m != size:
        raise ValueError("cloud size must be a power of two")
    u = qmc.Sobol(d=dim, scramble=True, seed=seed).random_base2(m)
    return np.clip(u, _TINY, 1.0 - _TINY)


def _scales(f0, spread_time=0.0):
    center_x = np.asarray(f0.x0, dtype=float)
    sx = np.asarray(f0._x_widths(), dtype=float)
    sx = np.where(np.isfinite(sx), sx, float(f0.sigma_x))
    sv = np.asarray(f0._v_widths(), dtype=float)
    # free streaming over spread_time widens the spatial support
    sx = np.sqrt(sx**2 + (spread_time * np.max(sv)) ** 2)
    return center_x, sx, np.asarray(f0._v_shift(), dtype=float), sv


def make_cloud(tag, size, f0, seed, half_width=4.0, spread_time=0.0):
    """Cartesian cloud matched to the scales of ``f0`` transported to ``spread_time``.

    Spatial widths are ``sqrt(sigma_x^2 + (spread_time sigma_v)^2)`` so that
    the sampling density stays wider than the solution it integrates.  An
    infinite perpendicular width falls back to ``sigma_x`` for sampling.
    """
    cx, sx, cv, sv = _scales(f0, spread_time)
    center = np.concatenate([cx, cv])
    width = np.concatenate([sx, sv])
    u = _sobol(6, size, seed)
    if tag == "gauss-weighted":
        z = ndtri(u)
        pts = center + width * z
        log_p = -0.5 * np.sum(z * z, axis=1) - 3.0 * np.log(2.0 * np.pi) - np.sum(np.log(width))
        w = np.exp(-log_p) / size
    elif tag == "low-discrepancy-box":
        pts = center + width * half_width * (2.0 * u - 1.0)
        w = np.full(size, np.prod(2.0 * half_width * width) / size)
    else:
        raise ValueError(f"unknown cloud tag {tag!r}")
    return SampleCloud(pts, w, tag)


def make_cyl_cloud(tag, size, f0, seed, half_width=4.0, spread_time=0.0):
    """Cylindrical cloud over ``(x, v_par, v_perp)`` with the ``v_perp`` measure."""
    cx, sx, cv, sv = _scales(f0, spread_time)
    s_par = sv[0]
    s_perp = float(np.sqrt(sv[1] * sv[2]))
    u = _sobol(5, size, seed)
    if tag == "gauss-weighted":
        z = ndtri(u[:, :4])
        x = cx + sx * z[:, :3]
        v_par = cv[0] + s_par * z[:, 3]
        v_perp = s_perp * np.sqrt(-2.0 * np.log1p(-u[:, 4]))
        # density: gaussian in (x, v_par) times Rayleigh(v_perp); the v_perp factor cancels
        log_g = -0.5 * np.sum(z * z, axis=1) - 2.0 * np.log(2.0 * np.pi) - np.sum(np.log(sx)) - np.log(s_par)
        w = s_perp**2 * np.exp(-log_g + 0.5 * (v_perp / s_perp) ** 2) / size
    elif tag == "low-discrepancy-box":
        x = cx + sx * half_width * (2.0 * u[:, :3] - 1.0)
        v_par = cv[0] + s_par * half_width * (2.0 * u[:, 3] - 1.0)
        v_perp = s_perp * half_width * u[:, 4]
        vol = np.prod(2.0 * half_width * sx) * 2.0 * half_width * s_par * half_width * s_perp
        w = vol * v_perp / size
    else:
        raise ValueError(f"unknown cloud tag {tag!r}")
    pts = np.column_stack([x, v_par, v_perp])
    return SampleCloud(pts, w, tag, cylindrical=True)


def pairwise_sum(values):
    """Deterministic pairwise sum of a 1-D array (numpy's contiguous reduction)."""
    return float(np.add.reduce(np.ascontiguousarray(values, dtype=float).ravel()))


def cloud_norm(values, cloud: SampleCloud):
    """``sqrt(sum_i w_i values_i^2)``, scaled by ``max |values|`` against under- and overflow.

    Raises
    ------
    ValueError
        ``values`` does not have one entry per cloud point.
    """
    values = np.asarray(values, dtype=float)
    if values.shape != (cloud.size,):
        raise ValueError(f"expected {cloud.size} values, got shape {values.shape}")
    scale = float(np.max(np.abs(values), initial=0.0))
    if scale == 0.0 or not np.isfinite(scale):
        return float(np.sqrt(pairwise_sum(cloud.weights * values * values)))
    r = values / scale
    return scale * float(np.sqrt(pairwise_sum(cloud.weights * r * r)))


def profile_norm(profiles, cloud: SampleCloud):
    """Cloud norm of angle profiles ``(N, n)`` using the angle average of the squares.

    Scalars and profiles are thus measured alike: a profile constant in the
    angle has the same norm as the scalar.
    """
    profiles = np.asarray(profiles, dtype=float)
    if profiles.shape[0] != cloud.size:
        raise ValueError(f"expected {cloud.size} profiles, got {profiles.shape[0]}")
    scale = float(np.max(np.abs(profiles), initial=0.0))
    if scale == 0.0 or not np.isfinite(scale):
        scale = 1.0
    r = profiles / scale
    return scale * float(np.sqrt(pairwise_sum(cloud.weights * np.mean(r * r, axis=1))))
