"""Pure numpy block integrators, API-compatible with ``_ckernels``.

Trials are vectorised along the first axis; time is stepped in Python.
"""

import numpy as np

LORENZ = 0
LORENZ_PRINTED = 1
ROSSLER = 2
CHUA = 3
CHUA_PRINTED = 4
SL_RADIAL = 5
SL_XINPUT = 6
LINEAR = 7

GUARD = 1e12
TWO_PI = 2.0 * np.pi


class _Singular(Exception):
    pass


def _chua_f(x, m0, m1):
    return m1 * x + 0.5 * (m0 - m1) * (np.abs(x + 1.0) - np.abs(x - 1.0))


def _rhs(kind, p, s, u, v):
    x = s[:, 0]
    if kind == LINEAR:
        return (-p[0] * x + p[1] * u)[:, None]
    y = s[:, 1]
    if kind == SL_RADIAL:
        r2 = x * x + y * y
        if np.any(r2 == 0.0):
            raise _Singular(int(np.flatnonzero(r2 == 0.0)[0]))
        r = np.sqrt(r2)
        dx = p[0] * x - p[1] * y - x * r2 + p[2] * (x / r) * u
        dy = p[1] * x + p[0] * y - y * r2 + p[2] * (y / r) * u
        return np.stack([dx, dy], axis=1)
    if kind == SL_XINPUT:
        r2 = x * x + y * y
        dx = p[0] * x - p[1] * y - x * r2 + p[2] * u + p[3] * v
        dy = p[1] * x + p[0] * y - y * r2
        return np.stack([dx, dy], axis=1)
    z = s[:, 2]
    if kind == LORENZ:
        d = (p[0] * (y - x) + p[3] * u, x * (p[1] - z) - y, x * y - p[2] * z)
    elif kind == LORENZ_PRINTED:
        d = (-p[0] * x - p[0] * y + p[3] * u, x * (p[1] - z) - y, x * y + p[2] * z)
    elif kind == ROSSLER:
        d = (-y - z, x + p[0] * y, p[1] + x * z - p[2] * z + p[3] * u)
    elif kind == CHUA:
        d = (p[0] * (y - x - _chua_f(x, p[2], p[3])) + p[4] * u, x - y + z, -p[1] * y)
    elif kind == CHUA_PRINTED:
        d = (p[0] * (y - x + _chua_f(x, p[2], p[3])) + p[4] * u, x - y + z, -p[1] * y)
    else:
        raise ValueError(f"unknown kind code {kind}")
    return np.stack(d, axis=1)


def _bad_rows(s, guard=GUARD):
    return ~np.all(np.isfinite(s) & (np.abs(s) <= guard), axis=1)


def ode_run(kind, params, dt, state, u, v, out, guard=GUARD):
    p = np.asarray(params)
    s = np.array(state, dtype=float)
    n = s.shape[0]
    zero = np.zeros(n)
    for b in range(len(u)):
        vb = zero if v is None else v[:, b]
        try:
            k1 = _rhs(kind, p, s, u[b], vb)
            k2 = _rhs(kind, p, s + 0.5 * dt * k1, u[b], vb)
            k3 = _rhs(kind, p, s + 0.5 * dt * k2, u[b], vb)
            k4 = _rhs(kind, p, s + dt * k3, u[b], vb)
        except _Singular as exc:
            return 2, b, exc.args[0]
        with np.errstate(over="ignore", invalid="ignore"):
            s = s + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        bad = _bad_rows(s, guard)
        if bad.any():
            return 1, b, int(np.flatnonzero(bad)[0])
        out[b] = s
    state[...] = s
    return 0, -1, -1


def esn_run(W, win, alpha, sigma, state, u, v, out, work=None):
    r = np.array(state, dtype=float)
    Wt = np.ascontiguousarray(W.T)
    for b in range(len(u)):
        drive = alpha * u[b]
        if v is not None:
            drive = drive + sigma * v[:, b][:, None]
        r = np.tanh(r @ Wt + drive * win)
        out[b] = r
    state[...] = r
    return 0, -1, -1


def copy_run(lam, omega, iota, state, u, out):
    x = np.array(state[:, 0], dtype=float)
    th = np.array(state[:, 1], dtype=float)
    shift = TWO_PI * omega
    for b in range(len(u)):
        m = np.mod(th + shift, TWO_PI)
        x = 2.0 * lam * np.tanh(x) * np.cos(th)
        th = m + iota * u[b]
        bad = ~(np.isfinite(x) & np.isfinite(th) & (np.abs(th) <= GUARD))
        if bad.any():
            return 1, b, int(np.flatnonzero(bad)[0])
        out[b, :, 0] = x
        out[b, :, 1] = th
    state[:, 0] = x
    state[:, 1] = th
    return 0, -1, -1


def power_sums(block, comps, kmax, weights, acc):
    x = block[:, :, np.asarray(comps)]
    p = np.broadcast_to(np.asarray(weights)[None, :, None], x.shape)
    for k in range(kmax):
        p = p * x
        acc[:, :, k] += p.sum(axis=1)
