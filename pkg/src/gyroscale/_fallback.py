"""Pure numpy flow kernels.

Same arithmetic as the compiled ``_core`` module, vectorized over points
instead of looping.  Used when the extension is not built and as the parity
reference in the test suite.
"""

import numpy as np

TWO_PI = 2.0 * np.pi

STRANG = 0
RK4 = 1


_CPH = np.cos(np.arange(3.0))
_SPH = np.sin(np.arange(3.0))


def _fields(code, p, x):
    n = x.shape[0]
    E = np.empty((n, 3))
    B = np.empty((n, 3))
    E[:] = p[0:3]
    B[:] = p[3:6]
    if code == 2:
        k = p[12]
        w = 1.0 / (1.0 + (x[:, 0] * x[:, 0] + x[:, 1] * x[:, 1] + x[:, 2] * x[:, 2]) / (p[13] * p[13]))
        s = np.sin(k * x)
        c = np.cos(k * x)
        for i in range(3):
            j = (i + 1) % 3
            m = (i + 2) % 3
            E[:, i] += p[6 + i] * (s[:, j] * _CPH[i] + c[:, j] * _SPH[i]) * w
            B[:, i] += p[9 + i] * (c[:, m] * _CPH[i] - s[:, m] * _SPH[i]) * w
    return E, B


def _cross(a, b):
    out = np.empty_like(a)
    out[:, 0] = a[:, 1] * b[:, 2] - a[:, 2] * b[:, 1]
    out[:, 1] = a[:, 2] * b[:, 0] - a[:, 0] * b[:, 2]
    out[:, 2] = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    return out


def _kick(v, E, B, d):
    # RK4 on dv/ds = E + v x B with x frozen
    d = d[:, None]
    k1 = E + _cross(v, B)
    k2 = E + _cross(v + 0.5 * d * k1, B)
    k3 = E + _cross(v + 0.5 * d * k2, B)
    k4 = E + _cross(v + d * k3, B)
    return v + d / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _rotation_coefficients(d, theta):
    ph = theta * d
    S = np.sin(ph)
    half = np.sin(0.5 * ph)
    omc = 2.0 * half * half
    return S / theta, omc / theta, 1.0 - omc, S


def _rotate_drift(x, v, d, coef):
    # exact flow of dx/ds = v, dv/ds = (theta / 2pi) v x M over signed time d
    a, b, C, S = coef
    v2 = v[:, 1].copy()
    v3 = v[:, 2].copy()
    x[:, 0] += d * v[:, 0]
    x[:, 1] += a * v2 + b * v3
    x[:, 2] += -b * v2 + a * v3
    v[:, 1] = C * v2 + S * v3
    v[:, 2] = -S * v2 + C * v3


def _rhs_full(x, v, code, p, theta):
    E, B = _fields(code, p, x)
    acc = E + _cross(v, B)
    # v x (theta e1) = theta (0, v3, -v2)
    acc[:, 1] += theta * v[:, 2]
    acc[:, 2] -= theta * v[:, 1]
    return v.copy(), acc


def flow_full(t, x, v, eps, code, p, nsteps, method):
    """Backward characteristics of the full equation.

    Parameters
    ----------
    t : ndarray, shape (n,)
        Start times; the state is carried back to time 0.
    x, v : ndarray, shape (n, 3)
    eps : float
    code : int
        Field family code.
    p : ndarray, shape (16,)
        Packed field parameters.
    nsteps : ndarray of int64, shape (n,)
        Number of equal steps for each point.
    method : int
        0 for Strang splitting with exact rotation, 1 for classical RK4.

    Returns
    -------
    x0, v0 : ndarray, shape (n, 3)
    bad : ndarray of int64, shape (n,)
        Step index at which a non-finite state appeared, or -1.
    """
    x = np.array(x, dtype=float, copy=True)
    v = np.array(v, dtype=float, copy=True)
    n = x.shape[0]
    theta = TWO_PI / eps
    nsteps = np.asarray(nsteps, dtype=np.int64)
    safe = np.where(nsteps > 0, nsteps, 1)
    h = -np.asarray(t, dtype=float) / safe
    bad = np.full(n, -1, dtype=np.int64)
    kmax = int(nsteps.max()) if n else 0
    if method == STRANG:
        E, B = _fields(code, p, x)
        coef = np.stack(_rotation_coefficients(h, theta))
    for k in range(kmax):
        act = (nsteps > k) & (bad < 0)
        if not act.all():
            idx = np.nonzero(act)[0]
        else:
            idx = slice(None)
        xa = x[idx]
        va = v[idx]
        ha = h[idx]
        if method == STRANG:
            va = _kick(va, E[idx], B[idx], 0.5 * ha)
            _rotate_drift(xa, va, ha, coef[:, idx])
            Ea, Ba = _fields(code, p, xa)
            va = _kick(va, Ea, Ba, 0.5 * ha)
            E[idx] = Ea
            B[idx] = Ba
        else:
            hh = ha[:, None]
            k1x, k1v = _rhs_full(xa, va, code, p, theta)
            k2x, k2v = _rhs_full(xa + 0.5 * hh * k1x, va + 0.5 * hh * k1v, code, p, theta)
            k3x, k3v = _rhs_full(xa + 0.5 * hh * k2x, va + 0.5 * hh * k2v, code, p, theta)
            k4x, k4v = _rhs_full(xa + hh * k3x, va + hh * k3v, code, p, theta)
            xa = xa + hh / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
            va = va + hh / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        x[idx] = xa
        v[idx] = va
        fin = np.isfinite(xa).all(axis=1) & np.isfinite(va).all(axis=1)
        if not fin.all():
            pts = np.arange(n)[idx][~fin]
            bad[pts] = k
    return x, v, bad


def _rhs_gc(x1, x2, x3, u1, code, p):
    pts = np.stack([x1, x2, x3], axis=1)
    E, B = _fields(code, p, pts)
    return u1, E[:, 0], B[:, 0]


def flow_gc(t, x, u, code, p, nsteps):
    """Backward characteristics of the averaged (guiding) model.

    Integrates ``dx1/ds = u1, du1/ds = E1(x), dpsi/ds = B1(x)`` with RK4 and
    rotates ``u_perp`` by the accumulated angle; ``x_perp`` is frozen.
    """
    x = np.array(x, dtype=float, copy=True)
    u = np.array(u, dtype=float, copy=True)
    n = x.shape[0]
    nsteps = np.asarray(nsteps, dtype=np.int64)
    safe = np.where(nsteps > 0, nsteps, 1)
    h = -np.asarray(t, dtype=float) / safe
    psi = np.zeros(n)
    bad = np.full(n, -1, dtype=np.int64)
    x2 = x[:, 1]
    x3 = x[:, 2]
    kmax = int(nsteps.max()) if n else 0
    for k in range(kmax):
        act = (nsteps > k) & (bad < 0)
        idx = slice(None) if act.all() else np.nonzero(act)[0]
        a = x[idx, 0]
        b = u[idx, 0]
        c = psi[idx]
        hh = h[idx]
        y2 = x2[idx]
        y3 = x3[idx]
        k1a, k1b, k1c = _rhs_gc(a, y2, y3, b, code, p)
        k2a, k2b, k2c = _rhs_gc(a + 0.5 * hh * k1a, y2, y3, b + 0.5 * hh * k1b, code, p)
        k3a, k3b, k3c = _rhs_gc(a + 0.5 * hh * k2a, y2, y3, b + 0.5 * hh * k2b, code, p)
        k4a, k4b, k4c = _rhs_gc(a + hh * k3a, y2, y3, b + hh * k3b, code, p)
        a = a + hh / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
        b = b + hh / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
        c = c + hh / 6.0 * (k1c + 2.0 * k2c + 2.0 * k3c + k4c)
        x[idx, 0] = a
        u[idx, 0] = b
        psi[idx] = c
        fin = np.isfinite(a) & np.isfinite(b) & np.isfinite(c)
        if not fin.all():
            pts = np.arange(n)[idx][~fin]
            bad[pts] = k
    # u_perp(0) = rot(-psi(0)) u_perp(t)
    cs = np.cos(psi)
    sn = np.sin(psi)
    u2 = u[:, 1].copy()
    u3 = u[:, 2].copy()
    u[:, 1] = cs * u2 + sn * u3
    u[:, 2] = -sn * u2 + cs * u3
    return x, u, bad
