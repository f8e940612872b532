# cython: language_level=3
"""Compiled inner loops: shifted power iteration, explicit growth, front stepping.

Every function here has a pure-Python twin in ``_fallback.py`` with the same
signature and semantics.
"""
from libc.math cimport fabs, log1p, sqrt

import numpy as np
cimport numpy as cnp

cnp.import_array()

# values below this are flushed to zero: they cannot affect any result, and
# subnormal arithmetic on strongly localised vectors is two orders slower
cdef double TINY = 1e-250


cdef inline void _csr_matvec(const int[::1] indptr, const int[::1] indices,
                             const double[::1] data, const double[::1] v,
                             double[::1] out) noexcept nogil:
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t i, p
    cdef double acc
    for i in range(n):
        acc = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            acc += data[p] * v[indices[p]]
        out[i] = acc


def power_iteration(const int[::1] indptr, const int[::1] indices,
                    const double[::1] data, double sigma, double[::1] v,
                    double tol, long max_iter):
    """Power iteration on ``sigma*I + A``; ``v`` is overwritten with the iterate.

    Stops when successive Rayleigh estimates differ by at most ``tol``, the
    Aitken tail estimate is within ``tol`` and the residual ``|A v - k v|``
    is within ``tol``. Returns ``(k, correction, iterations, converged,
    residual)`` where ``k`` is the last Rayleigh estimate of the unshifted
    eigenvalue and ``correction`` the Aitken tail estimate.
    """
    cdef Py_ssize_t n = v.shape[0]
    cdef Py_ssize_t i
    cdef long it = 0
    cdef double[::1] av = np.empty(n, dtype=np.float64)
    cdef double nrm, k = 0.0, k_prev = 0.0, d = 0.0, d_prev = 0.0
    cdef double r, rem, corr = 0.0, res = -1.0, t
    cdef bint converged = False

    with nogil:
        nrm = 0.0
        for i in range(n):
            nrm += v[i] * v[i]
        nrm = sqrt(nrm)
        for i in range(n):
            v[i] /= nrm

        for it in range(1, max_iter + 1):
            _csr_matvec(indptr, indices, data, v, av)
            k = 0.0
            for i in range(n):
                k += v[i] * av[i]
            if it > 2:
                d = k - k_prev
                if fabs(d) <= tol:
                    corr = 0.0
                    rem = fabs(d)
                    if d_prev != 0.0:
                        r = d / d_prev
                        if 0.0 < r < 1.0:
                            corr = d * r / (1.0 - r)
                            rem = fabs(corr)
                    if rem <= tol:
                        res = 0.0
                        for i in range(n):
                            t = av[i] - k * v[i]
                            res += t * t
                        res = sqrt(res)
                        if res <= tol:
                            converged = True
                            break
                d_prev = d
            elif it == 2:
                d_prev = k - k_prev
            k_prev = k
            nrm = 0.0
            for i in range(n):
                av[i] += sigma * v[i]
                nrm += av[i] * av[i]
            nrm = sqrt(nrm)
            for i in range(n):
                v[i] = av[i] / nrm
                if fabs(v[i]) < TINY:
                    v[i] = 0.0
    return k, corr, it, converged, res


def euler_growth(const int[::1] indptr, const int[::1] indices,
                 const double[::1] data, double dt, double[::1] v,
                 long nsteps, long tail):
    """Evolve ``v <- v + dt*A v`` (renormalised in l1) for ``nsteps`` steps.

    Returns the mean of ``log(growth factor)`` over the last ``tail`` steps.
    """
    cdef Py_ssize_t n = v.shape[0]
    cdef Py_ssize_t i
    cdef long s
    cdef double[::1] av = np.empty(n, dtype=np.float64)
    cdef double total, gain, acc = 0.0

    with nogil:
        total = 0.0
        for i in range(n):
            total += v[i]
        for i in range(n):
            v[i] /= total
        for s in range(nsteps):
            _csr_matvec(indptr, indices, data, v, av)
            gain = 0.0
            for i in range(n):
                gain += av[i]
            # sum(v) == 1 before the step, so the growth factor is 1 + dt*gain
            total = 1.0 + dt * gain
            for i in range(n):
                v[i] = (v[i] + dt * av[i]) / total
                if fabs(v[i]) < TINY:
                    v[i] = 0.0
            if s >= nsteps - tail:
                acc += log1p(dt * gain)
    return acc / tail


def front_advance(double[::1] u, const double[::1] a_face,
                  const double[::1] zeta, double dt, double h, long nsteps,
                  double left, double right):
    """Explicit steps of u_t = (a u_x)_x + zeta u (1 - u) with Dirichlet ghosts.

    ``a_face`` holds the n + 1 face coefficients (face i sits left of cell i).
    """
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t i
    cdef long s
    cdef double[::1] flux = np.empty(n + 1, dtype=np.float64)
    cdef double c = dt / (h * h)
    with nogil:
        for s in range(nsteps):
            flux[0] = a_face[0] * (u[0] - left)
            for i in range(1, n):
                flux[i] = a_face[i] * (u[i] - u[i - 1])
            flux[n] = a_face[n] * (right - u[n - 1])
            for i in range(n):
                u[i] = u[i] + c * (flux[i + 1] - flux[i]) + dt * zeta[i] * u[i] * (1.0 - u[i])
                if fabs(u[i]) < TINY:
                    u[i] = 0.0
