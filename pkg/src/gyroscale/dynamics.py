"""Pointwise solution values of the four transport models by backward characteristics.

The full model

    df/dt + v . grad_x f + (E + v x (B + M/eps)) . grad_v f = 0

is solved by carrying ``(x, v)`` back to time 0 and reading off ``f0``.  The
stiff rotation ``v x M / eps`` is integrated in closed form inside a Strang
splitting, so the cost per unit time scales like ``substeps / eps`` without
any stability restriction.  The averaged models (for the two-scale limit
``G``, the weak-* limit ``f`` and its gyro-average ``m``) only transport along
``e1`` and rotate ``u_perp`` by the parallel magnetic field; they share one
RK4 kernel.

Every evaluator accepts a single point or a batch (leading axis) and is a
pure function of its arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .kernel import (
    TWO_PI,
    FieldConfig,
    InitialDistribution,
    _check_node_count,
    cyl_to_cart,
    m_initial,
    periodic_nodes,
    ucar,
)

_METHODS = {
    "strang-split-exact-rotation": 0,
    "strang": 0,
    "rk4-reference": 1,
    "rk4": 1,
}


class FlowError(FloatingPointError):
    """A characteristic left the finite range during integration."""

    def __init__(self, point, step):
        super().__init__(f"non-finite state at point {point}, step {step}")
        self.point = point
        self.step = step


@dataclass(frozen=True)
class IntegratorSpec:
    """Step control for the characteristic integrators.

    Attributes
    ----------
    dt_max : float
        Cap on the step of every integrator.
    substeps_per_gyroperiod : int
        The full model uses steps no larger than ``eps / substeps``.
    method : str
        ``"strang-split-exact-rotation"`` (default) or ``"rk4-reference"``;
        the latter integrates the stiff term by plain RK4 and is only meant as
        a brute-force oracle with very many substeps.
    """

    dt_max: float = 0.01
    substeps_per_gyroperiod: int = 16
    method: str = "strang-split-exact-rotation"

    def __post_init__(self):
        if not (self.dt_max > 0 and math.isfinite(self.dt_max)):
            raise ValueError("dt_max must be positive and finite")
        if int(self.substeps_per_gyroperiod) != self.substeps_per_gyroperiod or self.substeps_per_gyroperiod < 1:
            raise ValueError("substeps_per_gyroperiod must be an integer >= 1")
        if self.method not in _METHODS:
            raise ValueError(f"unknown integrator method {self.method!r}")

    def full_step(self, eps):
        return min(self.dt_max, eps / self.substeps_per_gyroperiod)

    def to_dict(self):
        return {"dt_max": self.dt_max, "substeps_per_gyroperiod": self.substeps_per_gyroperiod,
                "method": self.method}


DEFAULT_SPEC = IntegratorSpec()


def _steps_for(t, cap):
    # relative slack keeps exact multiples of the cap from rounding up
    n = np.ceil(np.asarray(t, dtype=float) / cap * (1.0 - 1e-12))
    return np.where(np.asarray(t) > 0.0, np.maximum(n, 1.0), 0.0).astype(np.int64)


def full_step_count(t, eps, spec=DEFAULT_SPEC):
    """Number of equal steps the full-model integrator uses to reach time 0 from ``t``."""
    return _steps_for(t, spec.full_step(eps))


def gc_step_count(t, spec=DEFAULT_SPEC):
    """Number of RK4 steps used by the averaged-model integrator."""
    return _steps_for(t, spec.dt_max)


def _batch(t, x, v):
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    single = x.ndim == 1 and v.ndim == 1
    shape = np.broadcast_shapes(np.shape(t), x.shape[:-1], v.shape[:-1])
    tb = np.ascontiguousarray(np.broadcast_to(np.asarray(t, dtype=float), shape).reshape(-1))
    xb = np.ascontiguousarray(np.broadcast_to(x, shape + (3,)).reshape(-1, 3))
    vb = np.ascontiguousarray(np.broadcast_to(v, shape + (3,)).reshape(-1, 3))
    if np.any(tb < 0):
        raise ValueError("evaluation time must be nonnegative")
    return tb, xb, vb, shape, single


def _resolve_steps(n_steps, default, shape):
    if n_steps is None:
        return default
    n = np.broadcast_to(np.asarray(n_steps, dtype=np.int64), shape).reshape(-1)
    return np.ascontiguousarray(n)


def _raise_bad(bad):
    hit = np.nonzero(bad >= 0)[0]
    if hit.size:
        raise FlowError(int(hit[0]), int(bad[hit[0]]))


def flow_full_backward(t, x, v, eps, fields: FieldConfig, spec: IntegratorSpec = DEFAULT_SPEC,
                       n_steps=None):
    """Foot at time 0 of the full characteristic through ``(x, v)`` at time ``t``.

    Parameters
    ----------
    t : float or array_like
        Nonnegative time(s).
    x, v : array_like, shape (..., 3)
    eps : float
        Scale parameter, strictly positive.
    fields : FieldConfig
    spec : IntegratorSpec
    n_steps : int or array_like, optional
        Fixed step count.  By default it is chosen from ``t`` and the integrator settings;
        finite differences in ``t`` should pin it so the discrete flow is a
        smooth function of ``t``.

    Returns
    -------
    x0, v0 : numpy.ndarray
        Same shape as the broadcast inputs.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    tb, xb, vb, shape, _ = _batch(t, x, v)
    nsteps = _resolve_steps(n_steps, full_step_count(tb, eps, spec), shape)
    x0, v0, bad = _backend.impl().flow_full(
        tb, xb, vb, float(eps), fields.code, fields.packed(), nsteps, _METHODS[spec.method]
    )
    _raise_bad(bad)
    return np.asarray(x0).reshape(shape + (3,)), np.asarray(v0).reshape(shape + (3,))


def flow_gc_backward(t, x, u, fields: FieldConfig, spec: IntegratorSpec = DEFAULT_SPEC, n_steps=None):
    """Foot at time 0 of ``dx/ds = u1 e1, du/ds = E1 e1 + u x B1 e1``."""
    tb, xb, ub, shape, _ = _batch(t, x, u)
    nsteps = _resolve_steps(n_steps, gc_step_count(tb, spec), shape)
    x0, u0, bad = _backend.impl().flow_gc(tb, xb, ub, fields.code, fields.packed(), nsteps)
    _raise_bad(bad)
    return np.asarray(x0).reshape(shape + (3,)), np.asarray(u0).reshape(shape + (3,))


def eval_f_eps(t, x, v, eps, fields, f0: InitialDistribution, spec=DEFAULT_SPEC, n_steps=None):
    """Value of the exact solution ``f^eps(t, x, v)`` (up to integrator error)."""
    x0, v0 = flow_full_backward(t, x, v, eps, fields, spec, n_steps)
    return f0(x0, v0)


def eval_G(t, x, u, fields, f0, spec=DEFAULT_SPEC, n_steps=None):
    """Two-scale limit profile ``G(t, x, u)``."""
    x0, u0 = flow_gc_backward(t, x, u, fields, spec, n_steps)
    return f0(x0, u0)


def eval_f_weak(t, x, v, fields, f0, spec=DEFAULT_SPEC, n_tau=64, n_steps=None):
    """Weak-* limit ``f(t, x, v)``: the initial datum averaged over one gyration at the foot."""
    _check_node_count(n_tau, "n_tau")
    x0, v0 = flow_gc_backward(t, x, v, fields, spec, n_steps)
    taus = periodic_nodes(n_tau, 1.0)
    vals = f0(x0[..., None, :], ucar(taus, v0[..., None, :]))
    return np.mean(vals, axis=-1)


def eval_m(t, x, v_par, v_perp, fields, f0, spec=DEFAULT_SPEC, n_alpha=64, n_steps=None):
    """Cylindrical reduction ``m(t, x, v_par, v_perp)`` of the weak-* limit.

    Only ``(x1, v_par)`` move along the characteristic; ``x_perp`` and
    ``v_perp`` are frozen.  The gyro-angle never enters.
    """
    v_par = np.asarray(v_par, dtype=float)
    v_perp = np.asarray(v_perp, dtype=float)
    u = cyl_to_cart(v_par, v_perp, 0.0)
    x0, u0 = flow_gc_backward(t, x, u, fields, spec, n_steps)
    return m_initial(f0, x0, u0[..., 0], v_perp, n_alpha)


def gyration_displacement(t, v, eps):
    """Closed-form ``(x(t) - x(0), r(t/eps) v)`` for the field-free full flow.

    Returns the displacement accumulated forward over ``[0, t]`` by a particle
    with velocity ``v`` at time ``t`` and its velocity at time 0.
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    theta = TWO_PI / eps
    v_start = ucar(t / eps, v)
    ph = theta * t
    a = np.sin(ph) / theta
    b = 2.0 * np.sin(0.5 * ph) ** 2 / theta
    # x(t) - x(0) = int_0^t r(-s/eps) v_start ds
    disp = np.empty(np.broadcast_shapes(t.shape, v.shape[:-1]) + (3,))
    disp[..., 0] = t * v_start[..., 0]
    disp[..., 1] = a * v_start[..., 1] + b * v_start[..., 2]
    disp[..., 2] = -b * v_start[..., 1] + a * v_start[..., 2]
    return disp, v_start
