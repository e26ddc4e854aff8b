# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels; see ``_kernels_py`` for the reference."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, fabs, sqrt, erfc, M_PI

cnp.import_array()

cdef int MAX_NEWTON = 200
cdef double STEP_TOL = 8.881784197001252e-16  # 2**-50
cdef double INV_SQRT2 = 0.7071067811865476


cdef inline double _expit(double z) nogil:
    cdef double e
    if z >= 0:
        return 1.0 / (1.0 + exp(-z))
    e = exp(z)
    return e / (1.0 + e)


cdef inline double _rho_second(double z) nogil:
    cdef double e = exp(-fabs(z))
    return e / ((1.0 + e) * (1.0 + e))


cdef inline double _ndtr(double z) nogil:
    return 0.5 * erfc(-z * INV_SQRT2)


cdef double _prox(double gamma, double y, double v) nogil:
    cdef double lo, hi, w, wn, r, step, prev_step = 1e308
    cdef int k
    if gamma == 0.0:
        return v
    lo = v - gamma * (y if y > 1.0 - y else 1.0 - y) - 1.0
    hi = v + gamma + 1.0
    w = v - gamma * (_expit(v) - y)
    if w < lo:
        w = lo
    elif w > hi:
        w = hi
    for k in range(MAX_NEWTON):
        r = w + gamma * (_expit(w) - y) - v
        if r > 0.0:
            hi = w
        elif r < 0.0:
            lo = w
        else:
            return w
        step = r / (1.0 + gamma * _rho_second(w))
        wn = w - step
        if wn <= lo or wn >= hi or fabs(step) > 0.5 * prev_step:
            wn = 0.5 * (lo + hi)
        prev_step = fabs(wn - w)
        if fabs(wn - w) <= STEP_TOL * (fabs(w) if fabs(w) > 1.0 else 1.0):
            return wn
        w = wn
    return w


def prox_logistic_array(double gamma, double y, v):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] flat = np.array(v, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty_like(flat)
    cdef Py_ssize_t i, n = flat.shape[0]
    with nogil:
        for i in range(n):
            out[i] = _prox(gamma, y, flat[i])
    return out.reshape(np.shape(v))


cdef double _logistic_normal(double mu, double tau, int order,
                             double[::1] ghx, double[::1] ghw,
                             double[::1] lx, double[::1] lw) nogil:
    cdef double acc = 0.0, u
    cdef Py_ssize_t j
    if tau <= 1.0:
        if order == 1:
            for j in range(ghx.shape[0]):
                acc += ghw[j] * _expit(mu + tau * ghx[j])
        else:
            for j in range(ghx.shape[0]):
                acc += ghw[j] * _rho_second(mu + tau * ghx[j])
        return acc
    if order == 1:
        for j in range(lx.shape[0]):
            acc += lw[j] * _ndtr((mu - lx[j]) / tau)
    else:
        for j in range(lx.shape[0]):
            u = (mu - lx[j]) / tau
            acc += lw[j] * exp(-0.5 * u * u)
        acc /= sqrt(2.0 * M_PI) * tau
    return acc


def logistic_normal(mu, double tau, int order, gh_nodes, gh_weights,
                    l_nodes, l_weights):
    cdef double[::1] ghx = np.ascontiguousarray(gh_nodes, dtype=np.float64)
    cdef double[::1] ghw = np.ascontiguousarray(gh_weights, dtype=np.float64)
    cdef double[::1] lx = np.ascontiguousarray(l_nodes, dtype=np.float64)
    cdef double[::1] lw = np.ascontiguousarray(l_weights, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] flat = np.array(mu, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty_like(flat)
    cdef Py_ssize_t i
    with nogil:
        for i in range(flat.shape[0]):
            out[i] = _logistic_normal(flat[i], tau, order, ghx, ghw, lx, lw)
    if np.ndim(mu) == 0:
        return float(out[0])
    return out.reshape(np.shape(mu))


def tail_moments(x, w, double sd, double mu_scale, double tau, double gamma,
                 gh_nodes, gh_weights, l_nodes, l_weights):
    cdef double[::1] xs = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] ws = np.ascontiguousarray(w, dtype=np.float64)
    cdef double[::1] ghx = np.ascontiguousarray(gh_nodes, dtype=np.float64)
    cdef double[::1] ghw = np.ascontiguousarray(gh_weights, dtype=np.float64)
    cdef double[::1] lx = np.ascontiguousarray(l_nodes, dtype=np.float64)
    cdef double[::1] lw = np.ascontiguousarray(l_weights, dtype=np.float64)
    cdef double e_r = 0.0, e_theta = 0.0, e_u = 0.0
    cdef double p, s, q, mu, ga, gb
    cdef Py_ssize_t i
    with nogil:
        for i in range(xs.shape[0]):
            p = _prox(gamma, 0.0, sd * xs[i])
            s = _expit(p)
            q = _rho_second(p)
            mu = mu_scale * xs[i]
            ga = _logistic_normal(-mu, tau, 1, ghx, ghw, lx, lw)
            gb = _logistic_normal(mu, tau, 2, ghx, ghw, lx, lw)
            e_r += ws[i] * ga * s * s
            e_theta += ws[i] * gb * s
            e_u += ws[i] * ga * 2.0 * q / (1.0 + gamma * q)
    return e_r, e_theta, e_u
