"""Pure numpy implementations of the hot kernels.

These mirror ``_kernels.pyx`` one-for-one and are used whenever the compiled
module is unavailable (or ``BILEVEL_MI_BACKEND=python`` is set).
"""

import numpy as np
from scipy.special import expit, ndtr

_SQRT_2PI = np.sqrt(2.0 * np.pi)
_MAX_NEWTON = 200
# relative step size at which a Newton iterate counts as converged
_STEP_TOL = 2.0 ** -50


def _rho_second(w):
    e = np.exp(-np.abs(w))
    return e / (1.0 + e) ** 2


def prox_logistic_array(gamma, y, v):
    """Elementwise prox of ``gamma * l(y, .)`` at ``v``.

    Safeguarded Newton on ``w + gamma*(rho'(w) - y) - v``. A step that leaves
    the current bracket, or fails to halve the previous step, is replaced by
    bisection (Newton can cycle across the steep region around 0).
    """
    v = np.array(v, dtype=float, copy=True)
    if gamma == 0.0 or v.size == 0:
        return v
    lo = v - gamma * max(y, 1.0 - y) - 1.0
    hi = v + gamma + 1.0
    w = np.clip(v - gamma * (expit(v) - y), lo, hi)
    active = np.ones(v.shape, dtype=bool)
    prev_step = np.full(v.shape, np.inf)
    for _ in range(_MAX_NEWTON):
        s = expit(w)
        r = w + gamma * (s - y) - v
        hi = np.where(r > 0.0, w, hi)
        lo = np.where(r < 0.0, w, lo)
        step = r / (1.0 + gamma * _rho_second(w))
        wn = w - step
        slow = (wn <= lo) | (wn >= hi) | (np.abs(step) > 0.5 * prev_step)
        wn = np.where(slow & (r != 0.0), 0.5 * (lo + hi), wn)
        prev_step = np.abs(wn - w)
        wn = np.where(active, wn, w)
        active &= np.abs(wn - w) > _STEP_TOL * np.maximum(1.0, np.abs(w))
        w = wn
        if not active.any():
            break
    return w


def logistic_normal(mu, tau, order, gh_nodes, gh_weights, l_nodes, l_weights):
    """``E[rho'(mu + tau Z)]`` (order 1) or ``E[rho''(mu + tau Z)]`` (order 2).

    For ``tau <= 1`` the integrand is smooth in Z and Gauss-Hermite is used;
    otherwise the expectation is rewritten against the logistic density.
    """
    mu = np.asarray(mu, dtype=float)
    if tau <= 1.0:
        t = mu[..., None] + tau * gh_nodes
        if order == 1:
            vals = expit(t)
        else:
            vals = _rho_second(t)
        return vals @ gh_weights
    u = (mu[..., None] - l_nodes) / tau
    if order == 1:
        vals = ndtr(u)
    else:
        vals = np.exp(-0.5 * u * u) / (_SQRT_2PI * tau)
    return vals @ l_weights


def tail_moments(x, w, sd, mu_scale, tau, gamma,
                 gh_nodes, gh_weights, l_nodes, l_weights):
    """Fused evaluation of the three tail expectations.

    Outer nodes ``x`` (with Gaussian-inclusive weights ``w``) parametrise the
    prox argument ``v = sd * x``; the kappa-dependent factor is integrated out
    analytically per node through ``logistic_normal``.

    Returns ``(E[a s^2], E[b s], E[2 a q / (1 + gamma q)])`` with ``a = rho'(-kZ1)``,
    ``b = rho''(-kZ1)``, ``s = rho'(prox)``, ``q = rho''(prox)``.
    """
    x = np.asarray(x, dtype=float)
    p = prox_logistic_array(gamma, 0.0, sd * x)
    s = expit(p)
    q = _rho_second(p)
    mu = mu_scale * x
    ga = logistic_normal(-mu, tau, 1, gh_nodes, gh_weights, l_nodes, l_weights)
    gb = logistic_normal(mu, tau, 2, gh_nodes, gh_weights, l_nodes, l_weights)
    e_r = float(np.sum(w * ga * s * s))
    e_theta = float(np.sum(w * gb * s))
    e_u = float(np.sum(w * ga * 2.0 * q / (1.0 + gamma * q)))
    return e_r, e_theta, e_u
