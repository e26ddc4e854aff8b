"""Sampling from the bi-level Gaussian design with logistic labels."""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ..errors import InvalidArgumentError


@dataclass(frozen=True)
class FiniteDataset:
    features: np.ndarray
    labels: np.ndarray
    beta_star: np.ndarray
    dims: tuple
    params: tuple
    seed: object

    @property
    def n(self):
        return self.dims[0]

    @property
    def p(self):
        return self.dims[1]

    @property
    def d(self):
        return self.dims[2]


def _check_dims(n, p, d):
    if not (1 <= d < p):
        raise InvalidArgumentError(f"need 1 <= d < p, got d={d}, p={p}")
    if n < 1:
        raise InvalidArgumentError("need at least one sample")


def column_scales(p, d, eta):
    """Standard deviations of the feature columns: variance 1/d on the head, eta/(p-d) on the tail."""
    scales = np.empty(p)
    scales[:d] = np.sqrt(1.0 / d)
    scales[d:] = np.sqrt(eta / (p - d))
    return scales


def make_beta_star(p, d, sigma_beta, rng):
    """Ground truth supported on the head, scaled so that x'beta* has variance sigma_beta^2."""
    g = rng.standard_normal(d)
    beta = np.zeros(p)
    norm = np.linalg.norm(g)
    if norm > 0:
        beta[:d] = sigma_beta * np.sqrt(d) * g / norm
    return beta


def rng_for(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.default_rng(seed)


def sample_features(n, scales, rng):
    return rng.standard_normal((n, scales.size)) * scales


def sample_labels(margins, rng):
    return (rng.random(np.shape(margins)) < expit(margins)).astype(float)


def sample_points(n, beta_star, scales, rng):
    """Fresh (x, y) pairs for a fixed ground truth."""
    x = sample_features(n, scales, rng)
    return x, sample_labels(x @ beta_star, rng)


def sample_dataset(n, p, d, eta, sigma_beta, seed, beta_star=None):
    """Draw n rows from the bi-level design with labels P(y=1|x) = rho'(x'beta*).

    ``seed`` may be an int, a SeedSequence or a Generator. The ground truth is
    drawn from the same stream unless ``beta_star`` is given.
    """
    _check_dims(n, p, d)
    if eta < 0 or sigma_beta < 0:
        raise InvalidArgumentError("eta and sigma_beta must be nonnegative")
    rng = rng_for(seed)
    if beta_star is None:
        beta_star = make_beta_star(p, d, sigma_beta, rng)
    x, y = sample_points(n, beta_star, column_scales(p, d, eta), rng)
    return FiniteDataset(x, y, beta_star, (n, p, d), (eta, sigma_beta), seed)


def dims_for(spec, n):
    """(p, d) for a sample size n under the spec's ratios n/p and p/d."""
    p = int(round(n / spec.delta))
    d = int(round(p / spec.phi))
    _check_dims(n, p, d)
    return p, d
