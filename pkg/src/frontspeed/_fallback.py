"""Pure-Python/numpy twins of the compiled kernels in ``_kernels.pyx``."""
from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp

TINY = 1e-250


def _flush(v):
    v[np.abs(v) < TINY] = 0.0


def _csr(indptr, indices, data):
    n = len(indptr) - 1
    return sp.csr_matrix((np.asarray(data), np.asarray(indices), np.asarray(indptr)), shape=(n, n))


def power_iteration(indptr, indices, data, sigma, v, tol, max_iter):
    a = _csr(indptr, indices, data)
    v /= np.linalg.norm(v)
    k = k_prev = d_prev = corr = 0.0
    res = -1.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        av = a @ v
        k = float(v @ av)
        if it > 2:
            d = k - k_prev
            if abs(d) <= tol:
                corr = 0.0
                rem = abs(d)
                if d_prev != 0.0:
                    r = d / d_prev
                    if 0.0 < r < 1.0:
                        corr = d * r / (1.0 - r)
                        rem = abs(corr)
                if rem <= tol:
                    res = float(np.linalg.norm(av - k * v))
                    if res <= tol:
                        converged = True
                        break
            d_prev = d
        elif it == 2:
            d_prev = k - k_prev
        k_prev = k
        av += sigma * v
        v[:] = av / np.linalg.norm(av)
        _flush(v)
    return k, corr, it, converged, res


def euler_growth(indptr, indices, data, dt, v, nsteps, tail):
    a = _csr(indptr, indices, data)
    v /= v.sum()
    acc = 0.0
    for s in range(nsteps):
        av = a @ v
        gain = float(av.sum())
        v[:] = (v + dt * av) / (1.0 + dt * gain)
        _flush(v)
        if s >= nsteps - tail:
            acc += math.log1p(dt * gain)
    return acc / tail


def front_advance(u, a_face, zeta, dt, h, nsteps, left, right):
    c = dt / (h * h)
    padded = np.empty(len(u) + 2)
    padded[0] = left
    padded[-1] = right
    for _ in range(nsteps):
        padded[1:-1] = u
        flux = a_face * np.diff(padded)
        u += c * np.diff(flux) + dt * zeta * u * (1.0 - u)
        _flush(u)
