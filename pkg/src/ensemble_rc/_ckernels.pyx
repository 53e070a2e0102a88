# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled block integrators for trial ensembles.

Every routine advances ``n`` independent trials through ``B`` input steps,
writing the post-step state of trial ``i`` at step ``b`` to ``out[b, i]`` and
leaving the final state in ``state``. The return value is a
``(status, step, trial)`` triple: status 0 is success, 1 a non-finite or
oversized state, 2 a Stuart-Landau radial singularity.
"""

from libc.math cimport tanh, sqrt, cos, fmod, fabs, isfinite
from scipy.linalg.cython_blas cimport dgemm

import numpy as np

DEF MAXDIM = 3

cdef double TWO_PI = 6.283185307179586
cdef double GUARD = 1e12

# kind codes, mirrored in _kernels_py
cdef enum:
    LORENZ = 0
    LORENZ_PRINTED = 1
    ROSSLER = 2
    CHUA = 3
    CHUA_PRINTED = 4
    SL_RADIAL = 5
    SL_XINPUT = 6
    LINEAR = 7


cdef inline double _chua_f(double x, double m0, double m1) noexcept nogil:
    return m1 * x + 0.5 * (m0 - m1) * (fabs(x + 1.0) - fabs(x - 1.0))


cdef inline int _rhs(int kind, const double* p, const double* s, double u, double v,
              double* out) noexcept nogil:
    cdef double x = s[0]
    cdef double y, z, r2, r
    if kind == LINEAR:
        out[0] = -p[0] * x + p[1] * u
        return 0
    y = s[1]
    if kind == SL_RADIAL:
        r2 = x * x + y * y
        if r2 == 0.0:
            return 2
        r = sqrt(r2)
        out[0] = p[0] * x - p[1] * y - x * r2 + p[2] * (x / r) * u
        out[1] = p[1] * x + p[0] * y - y * r2 + p[2] * (y / r) * u
        return 0
    if kind == SL_XINPUT:
        r2 = x * x + y * y
        out[0] = p[0] * x - p[1] * y - x * r2 + p[2] * u + p[3] * v
        out[1] = p[1] * x + p[0] * y - y * r2
        return 0
    z = s[2]
    if kind == LORENZ:
        out[0] = p[0] * (y - x) + p[3] * u
        out[1] = x * (p[1] - z) - y
        out[2] = x * y - p[2] * z
    elif kind == LORENZ_PRINTED:
        out[0] = -p[0] * x - p[0] * y + p[3] * u
        out[1] = x * (p[1] - z) - y
        out[2] = x * y + p[2] * z
    elif kind == ROSSLER:
        out[0] = -y - z
        out[1] = x + p[0] * y
        out[2] = p[1] + x * z - p[2] * z + p[3] * u
    elif kind == CHUA:
        out[0] = p[0] * (y - x - _chua_f(x, p[2], p[3])) + p[4] * u
        out[1] = x - y + z
        out[2] = -p[1] * y
    elif kind == CHUA_PRINTED:
        out[0] = p[0] * (y - x + _chua_f(x, p[2], p[3])) + p[4] * u
        out[1] = x - y + z
        out[2] = -p[1] * y
    return 0


cdef inline int _rk4(int kind, const double* p, int dim, double dt, double* s,
              double u, double v) noexcept nogil:
    cdef double k1[MAXDIM]
    cdef double k2[MAXDIM]
    cdef double k3[MAXDIM]
    cdef double k4[MAXDIM]
    cdef double tmp[MAXDIM]
    cdef int j
    if _rhs(kind, p, s, u, v, k1):
        return 2
    for j in range(dim):
        tmp[j] = s[j] + 0.5 * dt * k1[j]
    if _rhs(kind, p, tmp, u, v, k2):
        return 2
    for j in range(dim):
        tmp[j] = s[j] + 0.5 * dt * k2[j]
    if _rhs(kind, p, tmp, u, v, k3):
        return 2
    for j in range(dim):
        tmp[j] = s[j] + dt * k3[j]
    if _rhs(kind, p, tmp, u, v, k4):
        return 2
    for j in range(dim):
        s[j] = s[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
    return 0


def ode_run(int kind, double[::1] params, double dt, double[:, ::1] state,
            double[::1] u, v, double[:, :, ::1] out, double guard=GUARD):
    cdef Py_ssize_t n = state.shape[0]
    cdef int dim = <int> state.shape[1]
    cdef Py_ssize_t nb = u.shape[0]
    cdef double[:, ::1] vv
    cdef bint noisy = v is not None
    cdef double s[MAXDIM]
    cdef double vi = 0.0
    cdef Py_ssize_t i, b
    cdef int j, code
    cdef int status = 0
    cdef Py_ssize_t bad_step = -1, bad_trial = -1
    if dim > MAXDIM:
        raise ValueError("state dimension exceeds compiled maximum")
    if noisy:
        vv = v
    with nogil:
        # step-major keeps the writes to out and state contiguous
        for b in range(nb):
            for i in range(n):
                for j in range(dim):
                    s[j] = state[i, j]
                if noisy:
                    vi = vv[i, b]
                code = _rk4(kind, &params[0], dim, dt, s, u[b], vi)
                if code:
                    status = code
                else:
                    for j in range(dim):
                        if not isfinite(s[j]) or fabs(s[j]) > guard:
                            status = 1
                if status:
                    bad_step = b
                    bad_trial = i
                    break
                for j in range(dim):
                    state[i, j] = s[j]
                    out[b, i, j] = s[j]
            if status:
                break
    return status, bad_step, bad_trial


def esn_run(double[:, ::1] W, double[::1] win, double alpha, double sigma,
            double[:, ::1] state, double[::1] u, v, out, double[:, ::1] work):
    # The matrix product runs in BLAS; tanh goes through numpy's vectorised
    # ufunc, which is several times faster than scalar libm calls.
    cdef int n = <int> state.shape[0]
    cdef int d = <int> state.shape[1]
    cdef Py_ssize_t nb = u.shape[0]
    cdef double[:, ::1] vv
    cdef double[:, :, ::1] ov = out
    cdef double[:, ::1] src = state
    cdef bint noisy = v is not None
    cdef double one = 1.0, zero = 0.0
    cdef double drive
    cdef Py_ssize_t b, i, j
    cdef char transa = b'T'
    cdef char transb = b'N'
    work_np = np.asarray(work)
    if noisy:
        vv = v
    if n == 0:
        return 0, -1, -1
    for b in range(nb):
        with nogil:
            # work = src @ W.T, column-major view
            dgemm(&transa, &transb, &d, &n, &d, &one, &W[0, 0], &d,
                  &src[0, 0], &d, &zero, &work[0, 0], &d)
            for i in range(n):
                drive = alpha * u[b]
                if noisy:
                    drive = drive + sigma * vv[i, b]
                for j in range(d):
                    work[i, j] = work[i, j] + drive * win[j]
        np.tanh(work_np, out=out[b])
        src = ov[b]
    state[...] = src
    return 0, -1, -1


def copy_run(double lam, double omega, double iota, double[:, ::1] state,
             double[::1] u, double[:, :, ::1] out):
    cdef Py_ssize_t n = state.shape[0]
    cdef Py_ssize_t nb = u.shape[0]
    cdef double shift = TWO_PI * omega
    cdef double x, th, m
    cdef Py_ssize_t i, b
    cdef int status = 0
    cdef Py_ssize_t bad_step = -1, bad_trial = -1
    with nogil:
        for i in range(n):
            x = state[i, 0]
            th = state[i, 1]
            for b in range(nb):
                m = fmod(th + shift, TWO_PI)
                if m < 0.0:
                    m = m + TWO_PI
                x = 2.0 * lam * tanh(x) * cos(th)
                th = m + iota * u[b]
                if not isfinite(x) or not isfinite(th) or fabs(th) > GUARD:
                    status = 1
                    bad_step = b
                    bad_trial = i
                    break
                out[b, i, 0] = x
                out[b, i, 1] = th
            if status:
                break
            state[i, 0] = x
            state[i, 1] = th
    return status, bad_step, bad_trial


def power_sums(double[:, :, ::1] block, long[::1] comps, int kmax,
               double[::1] weights, double[:, :, ::1] acc):
    """acc[b, c, k-1] += sum_i weights[i] * block[b, i, comps[c]] ** k, trials summed in index order."""
    cdef Py_ssize_t nb = block.shape[0]
    cdef Py_ssize_t n = block.shape[1]
    cdef Py_ssize_t nc = comps.shape[0]
    cdef Py_ssize_t b, c, i
    cdef int k
    cdef double x, p
    with nogil:
        for b in range(nb):
            for c in range(nc):
                for i in range(n):
                    x = block[b, i, comps[c]]
                    p = weights[i]
                    for k in range(kmax):
                        p = p * x
                        acc[b, c, k] += p
