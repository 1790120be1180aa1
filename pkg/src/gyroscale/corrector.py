"""First-order corrector and the gradients of the two-scale limit it needs.

With ``D(tau) = r(tau + 1/4) - r(1/4)`` and ``u = r(tau) v`` the corrector is

    l = D v . grad_xperp G + (D E + u x (D B)) . grad_uperp G

evaluated at ``(t, x, u)``.  Two conventions are provided:

``"literal"``
    The expression above, exactly as written.
``"consistent"``
    ``1/(2 pi)`` times the expression, with the magnetic term paired against
    the full ``grad_u G`` (the e1 component of ``u x (D B)`` is kept).  This is
    the term obtained by integrating the oscillating part of the filtered
    equation in the fast phase, and it is the one for which the first-order
    remainder has no O(1) fast-phase component.

The centered variants subtract the characteristic average, which lands the
corrector in the range of the fast operator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import DEFAULT_SPEC, eval_G, gc_step_count
from .kernel import TWO_PI, periodic_nodes, ucar

CONVENTIONS = ("literal", "consistent")


@dataclass(frozen=True)
class GradientSpec:
    """How to differentiate ``G``.

    Attributes
    ----------
    method : str
        ``"central-fd"`` or ``"analytic-when-available"``.  The analytic path is
        used for fields whose averaged characteristics are polynomial in time
        (zero, or uniform ``E = E1 e1`` with ``B = 0``); otherwise central
        differences are used.
    fd_step : float
        Central-difference step in ``x`` and ``u``.
    """

    method: str = "central-fd"
    fd_step: float = 1e-4

    def __post_init__(self):
        if self.method not in ("central-fd", "analytic-when-available"):
            raise ValueError(f"unknown gradient method {self.method!r}")
        if not self.fd_step > 0:
            raise ValueError("fd_step must be positive")

    def to_dict(self):
        return {"method": self.method, "fd_step": self.fd_step}


DEFAULT_GSPEC = GradientSpec()


def _analytic_ok(fields):
    if fields.family == "zero":
        return True
    return (fields.family in ("uniform", "parallel_uniform") and fields.E[1] == 0.0
            and fields.E[2] == 0.0 and not any(fields.B))


def grad_G(t, x, u, fields, f0, spec=DEFAULT_SPEC, gspec=DEFAULT_GSPEC, n_steps=None):
    """Full gradients ``(grad_x G, grad_u G)`` at ``(t, x, u)``.

    Finite differences hold the integrator step count fixed so the stencil
    differentiates one smooth discrete flow.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    shape = np.broadcast_shapes(np.shape(t), x.shape[:-1], u.shape[:-1])
    t = np.broadcast_to(np.asarray(t, dtype=float), shape)
    x = np.broadcast_to(x, shape + (3,))
    u = np.broadcast_to(u, shape + (3,))
    if gspec.method == "analytic-when-available" and _analytic_ok(fields):
        e1 = fields.E[0]
        x0 = x.copy()
        u0 = u.copy()
        x0[..., 0] = x[..., 0] - u[..., 0] * t + 0.5 * e1 * t * t
        u0[..., 0] = u[..., 0] - e1 * t
        gx, gu = f0.gradient(x0, u0)
        gu = gu.copy()
        gu[..., 0] -= t * gx[..., 0]
        return gx, gu
    if n_steps is None:
        n_steps = gc_step_count(t, spec)
    n_steps = np.broadcast_to(np.asarray(n_steps, dtype=np.int64), shape)
    d = gspec.fd_step
    # stencil rows: x + d e_i, x - d e_i, u + d e_i, u - d e_i
    off_x = np.zeros((12, 3))
    off_u = np.zeros((12, 3))
    for i in range(3):
        off_x[i, i] = d
        off_x[3 + i, i] = -d
        off_u[6 + i, i] = d
        off_u[9 + i, i] = -d
    lead = (12,) + (1,) * len(shape) + (3,)
    xs = x[None] + off_x.reshape(lead)
    us = u[None] + off_u.reshape(lead)
    ts = np.broadcast_to(t[None], (12,) + shape)
    ns = np.broadcast_to(n_steps[None], (12,) + shape)
    vals = eval_G(ts, xs, us, fields, f0, spec, n_steps=ns)
    gx = np.moveaxis((vals[0:3] - vals[3:6]) / (2.0 * d), 0, -1)
    gu = np.moveaxis((vals[6:9] - vals[9:12]) / (2.0 * d), 0, -1)
    return gx, gu


def grad_G_perp(t, x, u, fields, f0, spec=DEFAULT_SPEC, gspec=DEFAULT_GSPEC, n_steps=None):
    """``(grad_xperp G, grad_uperp G)``: full gradients with the e1 entries zeroed."""
    gx, gu = grad_G(t, x, u, fields, f0, spec, gspec, n_steps)
    gx = np.array(gx, copy=True)
    gu = np.array(gu, copy=True)
    gx[..., 0] = 0.0
    gu[..., 0] = 0.0
    return gx, gu


def _cross(a, b):
    return np.cross(a, b)


def corrector_from_gradients(tau, v, E, B, gx, gu, convention="literal"):
    """Corrector value given the fields at ``x`` and the gradients of ``G`` at ``u = r(tau) v``.

    All arguments broadcast; vectors carry a trailing axis of length 3.
    """
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown corrector convention {convention!r}")
    tau = np.asarray(tau, dtype=float)

    def D(w):
        return ucar(tau + 0.25, w) - ucar(0.25, w)

    u = ucar(tau, v)
    dv = D(v)
    de = D(E)
    mag = _cross(u, D(B))
    gxp = np.asarray(gx)[..., 1:]
    if convention == "literal":
        gup = np.asarray(gu)[..., 1:]
        return np.sum(dv[..., 1:] * gxp, axis=-1) + np.sum((de + mag)[..., 1:] * gup, axis=-1)
    gu = np.asarray(gu)
    return (np.sum(dv[..., 1:] * gxp, axis=-1) + np.sum((de + mag) * gu, axis=-1)) / TWO_PI


def _gradients_for(t, x, u, fields, f0, spec, gspec, convention, n_steps):
    if convention == "literal":
        return grad_G_perp(t, x, u, fields, f0, spec, gspec, n_steps)
    return grad_G(t, x, u, fields, f0, spec, gspec, n_steps)


def corrector_l(t, tau, x, v, fields, f0, spec=DEFAULT_SPEC, gspec=DEFAULT_GSPEC,
                convention="literal", n_steps=None):
    """First-order corrector ``l(t, tau, x, v)``.

    Parameters
    ----------
    t : float or array_like
        Slow time, nonnegative.
    tau : float or array_like
        Fast phase.
    x, v : array_like, shape (..., 3)
    convention : {"literal", "consistent"}
        See the module docstring.
    """
    x = np.asarray(x, dtype=float)
    u = ucar(tau, v)
    gx, gu = _gradients_for(t, x, u, fields, f0, spec, gspec, convention, n_steps)
    E, B = fields.evaluate(x)
    return corrector_from_gradients(tau, v, E, B, gx, gu, convention)


def centered_from_gradients(tau, v, E, B, gx, gu, convention="literal", n_tau=64):
    """Corrector minus its characteristic average, from precomputed gradients.

    Every node of the characteristic through ``(tau, v)`` shares
    ``u = r(tau) v``, so the gradients are reused for the whole average.
    """
    tau = np.asarray(tau, dtype=float)
    v = np.asarray(v, dtype=float)
    val = corrector_from_gradients(tau, v, E, B, gx, gu, convention)
    s = periodic_nodes(n_tau, 1.0)
    shape = np.broadcast_shapes(tau.shape, v.shape[:-1])
    tau_b = np.broadcast_to(tau, shape)[..., None] + s
    v_b = ucar(-s, np.broadcast_to(v, shape + (3,))[..., None, :])
    expand = (lambda a: np.asarray(a)[..., None, :])
    avg = corrector_from_gradients(tau_b, v_b, expand(E), expand(B), expand(gx), expand(gu),
                                   convention).mean(axis=-1)
    return val - avg


def corrector_l_centered(t, tau, x, v, fields, f0, spec=DEFAULT_SPEC, gspec=DEFAULT_GSPEC,
                         convention="literal", n_tau=64, n_steps=None):
    """Corrector with its kernel component removed (range of the fast operator)."""
    x = np.asarray(x, dtype=float)
    u = ucar(tau, v)
    gx, gu = _gradients_for(t, x, u, fields, f0, spec, gspec, convention, n_steps)
    E, B = fields.evaluate(x)
    return centered_from_gradients(tau, v, E, B, gx, gu, convention, n_tau)


def corrector_kernel_part(t, tau, x, v, fields, f0, spec=DEFAULT_SPEC, gspec=DEFAULT_GSPEC,
                          convention="literal", n_tau=64):
    """Characteristic average of the corrector (its kernel component)."""
    return (corrector_l(t, tau, x, v, fields, f0, spec, gspec, convention)
            - corrector_l_centered(t, tau, x, v, fields, f0, spec, gspec, convention, n_tau))
