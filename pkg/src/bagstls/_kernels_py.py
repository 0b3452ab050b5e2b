"""Pure-Python versions of the compiled kernels (same signatures)."""

import numpy as np


def lasso_cd_gram(gram, xty, lam, beta, tol, max_iter):
    p = gram.shape[0]
    resid = np.asarray(xty, dtype=float) - gram @ beta
    diag = [float(gram[j, j]) for j in range(p)]
    it = 0
    max_delta = 0.0
    while it < max_iter:
        it += 1
        max_delta = 0.0
        for j in range(p):
            gjj = diag[j]
            if gjj <= 0.0:
                continue
            z = resid[j] + gjj * beta[j]
            if z > lam:
                new = (z - lam) / gjj
            elif z < -lam:
                new = (z + lam) / gjj
            else:
                new = 0.0
            delta = new - beta[j]
            if delta != 0.0:
                beta[j] = new
                resid -= gram[:, j] * delta
                if abs(delta) > max_delta:
                    max_delta = abs(delta)
        if max_delta < tol:
            break
    return it, max_delta


def rk4_lotka_volterra(a, b, g, d, u0, v0, h, n_steps, blowup):
    out = np.empty((n_steps + 1, 2))
    u, v = float(u0), float(v0)
    out[0] = u, v
    hh = 0.5 * h
    last = n_steps

    def rhs(u, v):
        return a * u + b * u * v, g * v + d * u * v

    for i in range(n_steps):
        k1u, k1v = rhs(u, v)
        k2u, k2v = rhs(u + hh * k1u, v + hh * k1v)
        k3u, k3v = rhs(u + hh * k2u, v + hh * k2v)
        k4u, k4v = rhs(u + h * k3u, v + h * k3v)
        u = u + h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
        v = v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        out[i + 1] = u, v
        if not (abs(u) <= blowup and abs(v) <= blowup):
            last = i
            break
    return out, last
