"""Certified Newton solver for ridge-penalised logistic regression."""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import expit

from ..errors import InvalidArgumentError, TrainingError
from ..scalar import rho, rho_second


@dataclass(frozen=True)
class TrainedModel:
    beta_hat: np.ndarray
    lam: float
    gradient_norm: float
    iterations: int


def objective(x, y, beta, lam):
    """Mean logistic loss plus (lam / 2p) ||beta||^2."""
    z = x @ beta
    p = x.shape[1]
    return float(np.mean(rho(z) - y * z) + 0.5 * lam / p * beta @ beta)


def gradient(x, y, beta, lam):
    n, p = x.shape
    return x.T @ (expit(x @ beta) - y) / n + (lam / p) * beta


def _armijo(f, f0, slope, step_fn, max_halvings=60):
    t = 1.0
    for _ in range(max_halvings):
        val = f(step_fn(t))
        if val <= f0 + 1e-4 * t * slope:
            return t, val
        t *= 0.5
    return t, f(step_fn(t))


def _train_primal(x, y, lam, tol, max_iter):
    n, p = x.shape
    beta = np.zeros(p)
    f = lambda b: objective(x, y, b, lam)
    fval = f(beta)
    for it in range(max_iter + 1):
        g = gradient(x, y, beta, lam)
        gnorm = float(np.linalg.norm(g))
        if gnorm <= tol:
            return beta, gnorm, it
        if it == max_iter:
            break
        w = rho_second(x @ beta)
        h = (x.T * w) @ x / n
        h[np.diag_indices(p)] += lam / p
        step = -cho_solve(cho_factor(h), g)
        t, fval = _armijo(f, fval, float(g @ step), lambda t: beta + t * step)
        beta = beta + t * step
    raise TrainingError("Newton iteration cap reached", gnorm, max_iter)


def _train_kernel(kmat, y, lam, p, tol, max_iter):
    """Newton in the span of the rows: beta = X'c, so only the Gram matrix is needed."""
    n = kmat.shape[0]
    c = np.zeros(n)

    def f(cv):
        z = kmat @ cv
        return float(np.mean(rho(z) - y * z) + 0.5 * lam / p * cv @ z)

    fval = f(c)
    for it in range(max_iter + 1):
        z = kmat @ c
        r = (expit(z) - y) / n + (lam / p) * c
        kr = kmat @ r
        gnorm = float(np.sqrt(max(r @ kr, 0.0)))
        if gnorm <= tol:
            return c, gnorm, it
        if it == max_iter:
            break
        w = rho_second(z)
        jac = kmat * (w / n)[:, None]
        jac[np.diag_indices(n)] += lam / p
        step = -np.linalg.solve(jac, r)
        # directional derivative of the primal objective along X' step
        slope = float(kr @ step)
        t, fval = _armijo(f, fval, slope, lambda t: c + t * step)
        c = c + t * step
    raise TrainingError("Newton iteration cap reached", gnorm, max_iter)


def train(dataset, lam, tolerance=1e-8, max_iter=100, gram=None):
    """Minimise the ridge-logistic objective to a certified gradient norm.

    Uses full Newton in the p coordinates when p <= n, and Newton on the
    n-dimensional representer coefficients otherwise (``gram`` may supply
    X X' to avoid recomputing it).
    """
    if not lam > 0:
        raise InvalidArgumentError("lambda must be positive")
    x, y = dataset.features, dataset.labels
    n, p = x.shape
    if p <= n and gram is None:
        beta, gnorm, it = _train_primal(x, y, lam, tolerance, max_iter)
    else:
        kmat = x @ x.T if gram is None else gram
        c, gnorm, it = _train_kernel(kmat, y, lam, p, tolerance, max_iter)
        beta = x.T @ c
    return TrainedModel(beta, float(lam), gnorm, it)


def train_gram(kmat, y, lam, p, tolerance=1e-8, max_iter=100):
    """Kernel-form training from a Gram matrix; returns ``(coefficients, grad_norm, iterations)``."""
    return _train_kernel(kmat, y, lam, p, tolerance, max_iter)
