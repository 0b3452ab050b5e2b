# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: covariance-form lasso coordinate descent and
fixed-step RK4 for the Lotka-Volterra system."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


cdef inline double _soft(double z, double lam) nogil:
    if z > lam:
        return z - lam
    if z < -lam:
        return z + lam
    return 0.0


def lasso_cd_gram(const double[:, ::1] gram, const double[::1] xty,
                  double lam, double[::1] beta, double tol, long max_iter):
    """Cyclic coordinate descent on 0.5 b'Gb - c'b + lam |b|_1.

    ``gram`` and ``xty`` are already divided by n. ``beta`` is updated in
    place. Returns ``(iterations, last_max_delta)``.
    """
    cdef Py_ssize_t p = gram.shape[0]
    cdef Py_ssize_t j, k
    cdef long it = 0
    cdef double z, new, delta, max_delta = 0.0, gjj
    cdef double[::1] resid = np.empty(p, dtype=np.float64)

    with nogil:
        for k in range(p):
            z = xty[k]
            for j in range(p):
                z = z - gram[k, j] * beta[j]
            resid[k] = z
        while it < max_iter:
            it += 1
            max_delta = 0.0
            for j in range(p):
                gjj = gram[j, j]
                if gjj <= 0.0:
                    continue
                z = resid[j] + gjj * beta[j]
                new = _soft(z, lam) / gjj
                delta = new - beta[j]
                if delta != 0.0:
                    beta[j] = new
                    for k in range(p):
                        resid[k] = resid[k] - gram[k, j] * delta
                    if fabs(delta) > max_delta:
                        max_delta = fabs(delta)
            if max_delta < tol:
                break
    return it, max_delta


cdef inline void _lv_rhs(double u, double v, double a, double b, double g,
                         double d, double* du, double* dv) nogil:
    du[0] = a * u + b * u * v
    dv[0] = g * v + d * u * v


def rk4_lotka_volterra(double a, double b, double g, double d,
                       double u0, double v0, double h, long n_steps,
                       double blowup):
    """Classical RK4 on the Lotka-Volterra system.

    Returns ``(states, last_ok)`` where ``states`` has ``n_steps + 1`` rows;
    ``last_ok < n_steps`` means integration stopped because a state
    exceeded ``blowup`` in magnitude.
    """
    out = np.empty((n_steps + 1, 2), dtype=np.float64)
    cdef double[:, ::1] s = out
    cdef double u = u0, v = v0
    cdef double k1u, k1v, k2u, k2v, k3u, k3v, k4u, k4v
    cdef double hh = 0.5 * h
    cdef long i, last = n_steps
    s[0, 0] = u
    s[0, 1] = v
    with nogil:
        for i in range(n_steps):
            _lv_rhs(u, v, a, b, g, d, &k1u, &k1v)
            _lv_rhs(u + hh * k1u, v + hh * k1v, a, b, g, d, &k2u, &k2v)
            _lv_rhs(u + hh * k2u, v + hh * k2v, a, b, g, d, &k3u, &k3v)
            _lv_rhs(u + h * k3u, v + h * k3v, a, b, g, d, &k4u, &k4v)
            u = u + h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
            v = v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
            s[i + 1, 0] = u
            s[i + 1, 1] = v
            if not (fabs(u) <= blowup and fabs(v) <= blowup):
                last = i
                break
    return out, last
