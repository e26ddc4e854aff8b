"""Scalar primitives: logistic functions, Gaussian helpers, prox maps, quadrature."""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.special import expit, ndtr

from . import kernels
from .errors import InvalidArgumentError, NumericDomainError

_SQRT_2PI = np.sqrt(2.0 * np.pi)


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def rho(z):
    """log(1 + e^z), evaluated without overflow."""
    z = np.asarray(z, dtype=float)
    return _out(np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z))))


def rho_prime(z):
    return _out(expit(np.asarray(z, dtype=float)))


def rho_second(z):
    """Logistic density e^{-|z|}/(1+e^{-|z|})^2; stays positive for large |z|."""
    e = np.exp(-np.abs(np.asarray(z, dtype=float)))
    return _out(e / (1.0 + e) ** 2)


def logistic_loss(y, z):
    """Cross-entropy loss of label ``y`` at margin ``z``."""
    return _out(rho(z) - np.asarray(y, dtype=float) * np.asarray(z, dtype=float))


def label_map(gamma, y, z):
    """The increasing map z -> z + gamma*(rho'(z) - y) whose inverse is the prox."""
    z = np.asarray(z, dtype=float)
    return _out(z + gamma * (expit(z) - y))


def label_map_derivative(gamma, z):
    return _out(1.0 + gamma * np.asarray(rho_second(z)))


def _check_gamma_y(gamma, y):
    if not np.isfinite(gamma) or gamma < 0:
        raise InvalidArgumentError(f"gamma must be finite and >= 0, got {gamma!r}")
    if y not in (0, 1):
        raise InvalidArgumentError(f"label must be 0 or 1, got {y!r}")


def prox_logistic(gamma, y, v):
    """Prox of ``gamma * l(y, .)`` at ``v``; accepts scalars or arrays in ``v``."""
    _check_gamma_y(gamma, y)
    arr = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("prox_logistic needs finite input")
    return _out(kernels.prox_logistic_array(float(gamma), float(y), arr))


def prox_ridge_scalar(t, a, v):
    """Prox of v -> (a v)^2 / 2 with step t."""
    return v / (1.0 + t * a * a)


def gaussian_pdf(z):
    z = np.asarray(z, dtype=float)
    return _out(np.exp(-0.5 * z * z) / _SQRT_2PI)


def gaussian_cdf(z):
    return _out(ndtr(np.asarray(z, dtype=float)))


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights of a rule approximating a standard Gaussian expectation.

    For 2-D rules ``nodes`` has shape (m, 2).
    """

    nodes: np.ndarray
    weights: np.ndarray
    kind: str

    def __post_init__(self):
        if self.kind not in ("gauss-hermite-1d", "gauss-hermite-2d-tensor", "adaptive-1d"):
            raise InvalidArgumentError(f"unknown rule kind {self.kind!r}")
        if len(self.nodes) != len(self.weights):
            raise InvalidArgumentError("nodes and weights differ in length")
        if np.any(self.weights <= 0):
            raise InvalidArgumentError("quadrature weights must be positive")

    @property
    def dim(self):
        return 2 if self.kind == "gauss-hermite-2d-tensor" else 1

    def __len__(self):
        return len(self.weights)


def gauss_hermite(n=64):
    """Probabilists' Gauss-Hermite rule normalised to integrate against N(0,1)."""
    x, w = hermegauss(n)
    w = w / _SQRT_2PI
    # nodes come out symmetric up to rounding; enforce it so odd moments vanish
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    return QuadratureRule(x, w / w.sum(), "gauss-hermite-1d")


def gauss_hermite_2d(n=80):
    base = gauss_hermite(n)
    z1, z2 = np.meshgrid(base.nodes, base.nodes, indexing="ij")
    nodes = np.column_stack([z1.ravel(), z2.ravel()])
    weights = np.outer(base.weights, base.weights).ravel()
    return QuadratureRule(nodes, weights, "gauss-hermite-2d-tensor")


@lru_cache(maxsize=None)
def _leggauss(n):
    return np.polynomial.legendre.leggauss(n)


def composite_legendre(breakpoints, per_panel):
    """Gauss-Legendre nodes/weights over consecutive panels of ``breakpoints``."""
    t, tw = _leggauss(per_panel)
    b = np.asarray(breakpoints, dtype=float)
    half = 0.5 * np.diff(b)
    mid = 0.5 * (b[1:] + b[:-1])
    nodes = (mid[:, None] + half[:, None] * t).ravel()
    weights = (half[:, None] * tw).ravel()
    return nodes, weights


def clustered_gaussian_rule(features=(), half_width=9.0, per_panel=8, step=1.0):
    """Composite Gauss-Legendre rule for E[f(Z)], Z ~ N(0,1).

    ``features`` is a sequence of (center, scale) pairs marking places where f
    changes quickly; breakpoints are packed geometrically around each one so
    that sharp transitions are resolved without a globally fine grid.
    """
    pts = list(np.linspace(-half_width, half_width, int(np.ceil(2 * half_width / step)) + 1))
    offsets = 2.0 ** np.arange(-2, 8)
    for center, scale in features:
        if not (np.isfinite(center) and np.isfinite(scale)) or scale <= 0:
            continue
        pts.extend(center + scale * offsets)
        pts.extend(center - scale * offsets)
        pts.append(center)
    b = np.unique(np.clip(pts, -half_width, half_width))
    b = b[np.concatenate([[True], np.diff(b) > 1e-12])]
    x, w = composite_legendre(b, per_panel)
    w = w * np.exp(-0.5 * x * x) / _SQRT_2PI
    keep = w > 0
    return QuadratureRule(x[keep], w[keep], "adaptive-1d")


def logistic_rule(half_width=36.0, panels=8, per_panel=18):
    """Nodes/weights integrating against the logistic density rho''(l) dl."""
    x, w = composite_legendre(np.linspace(-half_width, half_width, panels + 1), per_panel)
    return x, w * np.asarray(rho_second(x))


_GH64 = gauss_hermite(64)
_LOGISTIC = logistic_rule()


def logistic_normal(mu, tau, order=1):
    """E[rho'(mu + tau Z)] (order 1) or E[rho''(mu + tau Z)] (order 2)."""
    if order not in (1, 2):
        raise InvalidArgumentError("order must be 1 or 2")
    return _out(kernels.logistic_normal(
        np.asarray(mu, dtype=float), float(abs(tau)), order,
        _GH64.nodes, _GH64.weights, *_LOGISTIC))


def expect_1d(rule, f):
    vals = np.asarray(f(rule.nodes), dtype=float)
    bad = ~np.isfinite(vals)
    if bad.any():
        raise NumericDomainError("non-finite integrand", node=float(rule.nodes[np.argmax(bad)]))
    return float(vals @ rule.weights)


def expect_2d(rule, f):
    """E[f(Z1, Z2)] for a tensor rule; ``f`` is called once on node arrays."""
    if rule.dim != 2:
        raise InvalidArgumentError("expect_2d needs a 2-D tensor rule")
    vals = np.broadcast_to(
        np.asarray(f(rule.nodes[:, 0], rule.nodes[:, 1]), dtype=float), rule.weights.shape)
    bad = ~np.isfinite(vals)
    if bad.any():
        i = int(np.argmax(bad))
        raise NumericDomainError("non-finite integrand", node=tuple(rule.nodes[i]))
    return float(vals @ rule.weights)
