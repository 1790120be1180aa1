"""Projections onto the kernel and range of the two fast operators.

Gyro-angle calculus
    For profiles sampled on uniform angle nodes, the kernel of d/dalpha is the
    constants and the projection is the node average.  The range is the
    mean-free profiles, which have a periodic antiderivative.

Fast-phase calculus
    For callables ``g(tau, v)`` that are 1-periodic in ``tau``, the operator
    ``L = d/dtau + (v x M) . grad_v`` transports along ``s -> (tau + s,
    r(-s) v)``.  Its kernel consists of the functions of ``u = r(tau) v`` and
    the orthogonal projection is the average along one period of that
    characteristic.

Callable profiles take a 1-D array of phases and an ``(m, 3)`` array of
velocities and return ``m`` values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernel import TWO_PI, _check_node_count, cart_to_cyl, cyl_to_cart, periodic_nodes, ucar

_PERIODS = {"alpha": TWO_PI, "tau": 1.0}


class ImageConditionError(ValueError):
    """Input to an antiderivative is not in the range of the operator.

    Attributes
    ----------
    kernel_norm : float
        Largest measured kernel component.
    """

    def __init__(self, message, kernel_norm):
        super().__init__(f"{message} (measured kernel component {kernel_norm:.3e})")
        self.kernel_norm = kernel_norm


@dataclass(frozen=True)
class PeriodicProfile:
    """Samples of a periodic function on uniform nodes.

    ``values`` may carry leading batch axes; nodes run along the last axis.
    """

    values: np.ndarray
    period: str = "alpha"

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if self.period not in _PERIODS:
            raise ValueError(f"period tag must be 'alpha' or 'tau', got {self.period!r}")
        _check_node_count(vals.shape[-1] if vals.ndim else 0, "node count")
        if not np.all(np.isfinite(vals)):
            raise ValueError("profile values must be finite")
        object.__setattr__(self, "values", vals)

    @property
    def n(self):
        return self.values.shape[-1]

    @property
    def length(self):
        return _PERIODS[self.period]

    @property
    def nodes(self):
        return periodic_nodes(self.n, self.length)

    @classmethod
    def sample(cls, func, n, period="alpha"):
        """Sample ``func`` at the uniform nodes of one period."""
        return cls(np.asarray(func(periodic_nodes(n, _PERIODS[period])), dtype=float), period)


def _require_alpha(profile):
    if profile.period != "alpha":
        raise ValueError("expected a profile in the gyro-angle (period tag 'alpha')")


def alpha_project(profile: PeriodicProfile):
    """Gyro-average ``(1/2pi) int f dalpha`` as the node mean."""
    _require_alpha(profile)
    return np.mean(profile.values, axis=-1)


def alpha_fluct(profile: PeriodicProfile) -> PeriodicProfile:
    """Profile minus its gyro-average."""
    _require_alpha(profile)
    mean = np.mean(profile.values, axis=-1, keepdims=True)
    return PeriodicProfile(profile.values - mean, "alpha")


def spectral_antiderivative(values, length):
    """Zero-mean periodic antiderivative of mean-free node values.

    The Nyquist mode is dropped: its antiderivative vanishes on the nodes.
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[-1]
    coef = np.fft.rfft(values, axis=-1)
    k = np.arange(coef.shape[-1])
    omega = TWO_PI / length * k
    out = np.zeros_like(coef)
    out[..., 1:] = coef[..., 1:] / (1j * omega[1:])
    if n % 2 == 0:
        out[..., -1] = 0.0
    return np.fft.irfft(out, n=n, axis=-1)


def spectral_derivative(values, length):
    """Derivative of a periodic trigonometric interpolant at the nodes."""
    values = np.asarray(values, dtype=float)
    n = values.shape[-1]
    coef = np.fft.rfft(values, axis=-1)
    omega = TWO_PI / length * np.arange(coef.shape[-1])
    coef = coef * (1j * omega)
    if n % 2 == 0:
        coef[..., -1] = 0.0
    return np.fft.irfft(coef, n=n, axis=-1)


def alpha_antiderivative(fluct: PeriodicProfile, tol=1e-10) -> PeriodicProfile:
    """Periodic antiderivative ``p`` with ``dp/dalpha = fluct`` and zero mean.

    Parameters
    ----------
    fluct : PeriodicProfile
        Mean-free profile (within ``tol`` times ``max(1, max|fluct|)``).

    Raises
    ------
    ImageConditionError
        If the input has a gyro-average, i.e. is not a derivative.
    """
    _require_alpha(fluct)
    mean = np.abs(np.mean(fluct.values, axis=-1))
    scale = max(1.0, float(np.max(np.abs(fluct.values))))
    if np.max(mean, initial=0.0) > tol * scale:
        raise ImageConditionError("profile is not mean-free in alpha", float(np.max(mean)))
    return PeriodicProfile(spectral_antiderivative(fluct.values, TWO_PI), "alpha")


# ---------------------------------------------------------------------------
# Fast-phase calculus
# ---------------------------------------------------------------------------


def _points(tau, v):
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    v = np.asarray(v, dtype=float)
    single = v.ndim == 1 and tau.size == 1
    v = np.atleast_2d(v)
    n = max(tau.shape[0], v.shape[0])
    return np.broadcast_to(tau, (n,)), np.broadcast_to(v, (n, 3)), single


def _unwrap(values, single):
    return float(values[0]) if single else values


def characteristic_samples(g, tau, v, n_tau):
    """Values of ``g`` at ``(tau + s_j, r(-s_j) v)`` for ``s_j = j / n_tau``.

    Returns an array of shape ``(points, n_tau)``.
    """
    _check_node_count(n_tau, "n_tau")
    tau, v, _ = _points(tau, v)
    s = periodic_nodes(n_tau, 1.0)
    phases = tau[:, None] + s[None, :]
    vel = ucar(-s[None, :], v[:, None, :])
    vals = np.asarray(g(phases.reshape(-1), vel.reshape(-1, 3)), dtype=float)
    return vals.reshape(phases.shape)


def tau_ker_project(g, tau, v, n_tau=64):
    """Characteristic average ``int_0^1 g(sigma, r(tau - sigma) v) dsigma``.

    The result depends on ``(tau, v)`` only through ``u = r(tau) v``.
    """
    tau_b, v_b, single = _points(tau, v)
    # sigma runs over a period, so shifting the start to tau is immaterial
    vals = characteristic_samples(g, tau_b, v_b, n_tau)
    return _unwrap(np.mean(vals, axis=-1), single)


def tau_ker_project_corotating(g, tau, v, n_tau=64):
    """Kernel projection computed on a tensor grid in ``(tau, alpha)``.

    At fixed ``(v_par, v_perp)`` the profile is sampled on ``n_tau x n_tau``
    nodes and expanded in modes ``exp(2 pi i p tau + i q alpha)``.  Writing
    ``sigma = tau + alpha / 2pi`` and ``beta = tau - alpha / 2pi``, the kernel
    of the fast operator is spanned by the modes that do not depend on
    ``beta``, which are exactly the diagonal ``p = q``.  Dropping the
    off-diagonal modes is the average over ``beta``; the kept series is then
    evaluated at the requested point.  This is a second realization of
    :func:`tau_ker_project` used to cross-check it.
    """
    _check_node_count(n_tau, "n_tau")
    tau_b, v_b, single = _points(tau, v)
    n = n_tau
    v_par, v_perp, alpha = cart_to_cyl(v_b)
    tg = periodic_nodes(n, 1.0)
    ag = periodic_nodes(n, TWO_PI)
    out = np.empty(tau_b.shape[0])
    freqs = np.fft.fftfreq(n, 1.0 / n)
    keep = np.abs(freqs) < n // 2
    for i in range(tau_b.shape[0]):
        vel = cyl_to_cart(v_par[i], v_perp[i], ag)
        grid_t = np.repeat(tg, n)
        grid_v = np.tile(vel, (n, 1))
        vals = np.asarray(g(grid_t, grid_v), dtype=float).reshape(n, n)
        coef = np.fft.fft2(vals) / (n * n)
        diag = np.diagonal(coef)[keep]
        phase = TWO_PI * tau_b[i] + alpha[i]
        out[i] = np.real(np.sum(diag * np.exp(1j * freqs[keep] * phase)))
    return _unwrap(out, single)


def tau_im_part(g, tau, v, n_tau=64):
    """``g(tau, v)`` minus its kernel projection."""
    tau_b, v_b, single = _points(tau, v)
    direct = np.asarray(g(np.array(tau_b, dtype=float), np.array(v_b, dtype=float)), dtype=float)
    proj = np.mean(characteristic_samples(g, tau_b, v_b, n_tau), axis=-1)
    return _unwrap(direct - proj, single)


def tau_im_callable(g, n_tau=64):
    """The range component of ``g`` as a new callable profile."""
    return lambda tau, v: tau_im_part(g, tau, v, n_tau)


def antiderivative_along_characteristic(samples, tol=1e-8):
    """Zero-mean antiderivative at ``s = 0`` of characteristic samples.

    ``samples`` has shape ``(points, n)`` with nodes ``s_j = j / n`` along the
    fast characteristic.  Raises :class:`ImageConditionError` if a row mean
    exceeds ``tol`` times ``max(1, max|row|)``.
    """
    samples = np.asarray(samples, dtype=float)
    means = np.abs(np.mean(samples, axis=-1))
    scale = np.maximum(1.0, np.max(np.abs(samples), axis=-1))
    worst = np.max(means / scale, initial=0.0)
    if worst > tol:
        raise ImageConditionError("profile is not in the range of the fast operator",
                                  float(np.max(means)))
    return spectral_antiderivative(samples, 1.0)[..., 0]


def tau_antiderivative(h, tau, v, n_tau=64, tol=1e-8):
    """Solve ``(d/dtau + (v x M) . grad_v) k = h`` with zero characteristic mean.

    Parameters
    ----------
    h : callable
        Profile in the range of the fast operator (zero characteristic mean).
    tau, v : float or array, array_like
        Evaluation point(s).
    n_tau : int
        Nodes along the characteristic; the antiderivative is spectral.
    tol : float
        Admissible kernel component, relative to ``max(1, max|h|)``.

    Returns
    -------
    float or numpy.ndarray
        ``k(tau, v)``.
    """
    tau_b, v_b, single = _points(tau, v)
    vals = characteristic_samples(h, tau_b, v_b, n_tau)
    return _unwrap(antiderivative_along_characteristic(vals, tol), single)


def tau_operator(k, tau, v, step=1e-4):
    """Central difference of ``k`` along the fast characteristic at ``(tau, v)``."""
    tau_b, v_b, single = _points(tau, v)
    fwd = np.asarray(k(tau_b + step, ucar(-step, v_b)), dtype=float)
    bwd = np.asarray(k(tau_b - step, ucar(step, v_b)), dtype=float)
    return _unwrap((fwd - bwd) / (2.0 * step), single)


def tau_integrate_respects_split(F_ker, H_im, x, v_par, v_perp, n_tau=64, n_alpha=64,
                                 membership_tol=1e-6):
    """Check that tau-integration maps the fast splitting onto the gyro-angle splitting.

    For ``F`` in the kernel of the fast operator, ``int_0^1 F dtau`` is a
    function of ``(v_par, v_perp)`` only; for ``H`` in its range, the
    gyro-average of ``int_0^1 H dtau`` vanishes.

    Parameters
    ----------
    F_ker, H_im : callable
        Callable profiles ``(tau, v) -> value``; ``x`` is fixed and not passed.
    x : array_like
        Position; recorded for interface symmetry with the decompositions.
    v_par, v_perp : float
    n_tau, n_alpha : int
    membership_tol : float
        Inputs whose measured membership defect exceeds this raise ``ValueError``.

    Returns
    -------
    (float, float)
        Max-norm of the gyro-angle fluctuation of ``int F dtau`` and absolute
        gyro-average of ``int H dtau``.
    """
    _check_node_count(n_alpha, "n_alpha")
    _check_node_count(n_tau, "n_tau")
    alpha = periodic_nodes(n_alpha, TWO_PI)
    vel = cyl_to_cart(v_par, v_perp, alpha)
    taus = periodic_nodes(n_tau, 1.0)
    tt = np.repeat(taus, n_alpha)
    vv = np.tile(vel, (n_tau, 1))
    f_vals = np.asarray(F_ker(tt, vv), dtype=float)
    h_vals = np.asarray(H_im(tt, vv), dtype=float)
    f_ker = np.mean(characteristic_samples(F_ker, tt, vv, n_tau), axis=-1)
    # P H depends on u only, and u already sweeps the whole circle at tau = 0
    h_ker = np.mean(characteristic_samples(H_im, np.zeros(n_alpha), vel, n_tau), axis=-1)
    if np.max(np.abs(f_vals - f_ker)) > membership_tol:
        raise ValueError("F_ker is not in the kernel of the fast operator")
    if np.max(np.abs(h_ker)) > membership_tol:
        raise ValueError("H_im is not in the range of the fast operator")
    f_int = PeriodicProfile(f_vals.reshape(n_tau, n_alpha).mean(axis=0), "alpha")
    h_int = PeriodicProfile(h_vals.reshape(n_tau, n_alpha).mean(axis=0), "alpha")
    return float(np.max(np.abs(alpha_fluct(f_int).values))), float(abs(alpha_project(h_int)))
