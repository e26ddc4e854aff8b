"""Independent reference computations used to derive frozen test values.

Nothing here imports the package: these are slow, simple implementations
(bisection, power series, plain sampling) that the fast code is checked against.
"""

import math

import numpy as np


def sigmoid(w):
    if w >= 0:
        return 1.0 / (1.0 + math.exp(-w))
    e = math.exp(w)
    return e / (1.0 + e)


def bisect(f, lo, hi, steps=200):
    """Root of an increasing function on [lo, hi]."""
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def prox_bisect(gamma, y, v):
    return bisect(lambda w: w + gamma * (sigmoid(w) - y) - v, v - gamma - 1.0, v + gamma + 1.0)


def normal_cdf_series(x, terms=80):
    """Phi(x) from the Maclaurin series of erf."""
    t = x / math.sqrt(2.0)
    s = sum((-1) ** k * t ** (2 * k + 1) / (math.factorial(k) * (2 * k + 1)) for k in range(terms))
    return 0.5 * (1.0 + 2.0 / math.sqrt(math.pi) * s)


def ks_statistic(sample, cdf):
    """Two-sided one-sample Kolmogorov-Smirnov distance."""
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def central_difference(f, x, h=1e-5):
    g = np.empty_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        g[k] = (f(x + e) - f(x - e)) / (2 * h)
    return g


# Frozen values (computed once with the functions above, see the test docstrings).
PROX_2_1_0 = 0.6748316143423994          # prox_bisect(2, 1, 0)
SCALAR_TRAINER_ROOT = 0.40105813754154696  # bisect(lambda b: sigmoid(b) - 1 + b, -10, 10)
PHI_1_959964 = 0.9750000009035575        # normal_cdf_series(1.959964)
# E[rho'(-3 Z1) prox(1.3, 0, 2 Z1 + Z2)^2]: 8 scrambled Sobol replicates of 2^20
# points (bisection prox): 2.5676412286 with standard error 1.6e-6.  Plain MC with
# 1e7 draws gave 2.5705 +- 0.0018.
QMC_EXPECT_2D = 2.5676412286476973
MC_EXPECT_2D = (2.5705090125014873, 0.001753958554045963)
