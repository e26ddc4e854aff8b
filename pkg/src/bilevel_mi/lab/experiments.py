"""Seeded Monte Carlo experiments: leave-one-out outputs and membership losses."""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import logging
import os

import numpy as np

from ..errors import BilevelMIError, TrainingError
from ..scalar import logistic_loss
from .data import (column_scales, dims_for, make_beta_star, sample_features,
                   sample_labels, sample_points)
from .training import train_gram

log = logging.getLogger(__name__)

WORKERS_ENV = "BILEVEL_MI_WORKERS"
MAX_FAILED_FRACTION = 0.01


def default_workers():
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def child_rng(master_seed, *key):
    """Generator for a labelled sub-stream of ``master_seed``."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=key))


# spawn-key namespaces so that independent streams never collide
_SETUP, _TRIAL, _MODEL, _POOL, _SPLIT, _ERROR = range(6)


@dataclass(frozen=True)
class Probe:
    x: np.ndarray
    y: int
    z_star: float


@dataclass(frozen=True)
class LabSetup:
    """Ground truth and fixed probe points shared by every trial of an experiment."""

    n: int
    p: int
    d: int
    eta: float
    sigma_beta: float
    lam: float
    beta_star: np.ndarray
    probes: tuple = field(default=())

    @property
    def scales(self):
        return column_scales(self.p, self.d, self.eta)


def make_setup(spec, n, master_seed, n_probes=0, typical_probes=True):
    p, d = dims_for(spec, n)
    rng = child_rng(master_seed, _SETUP)
    beta = make_beta_star(p, d, spec.sigma_beta, rng)
    scales = column_scales(p, d, spec.eta)
    x = sample_features(n_probes, scales, rng)
    if typical_probes and n_probes:
        # pin each probe's head/tail energy at its mean; the asymptotic theory
        # describes points whose quadratic forms have concentrated
        x[:, :d] *= 1.0 / np.linalg.norm(x[:, :d], axis=1, keepdims=True)
        x[:, d:] *= np.sqrt(spec.eta) / np.linalg.norm(x[:, d:], axis=1, keepdims=True)
    y = sample_labels(x @ beta, rng)
    probes = tuple(Probe(x[i], int(y[i]), float(x[i] @ beta)) for i in range(n_probes))
    return LabSetup(n, p, d, spec.eta, spec.sigma_beta, spec.lam, beta, probes)


def _map_trials(fn, args, workers):
    if workers <= 1 or len(args) <= 1:
        return [fn(a) for a in args]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map preserves argument order, so results are reduced by trial index
        return list(pool.map(fn, args, chunksize=max(1, len(args) // (4 * workers))))


def _check_failures(failed, total):
    if failed > MAX_FAILED_FRACTION * total:
        raise BilevelMIError(f"{failed} of {total} trainings failed (budget {MAX_FAILED_FRACTION:.0%})")
    if failed:
        log.warning("%d of %d trials failed and were excluded", failed, total)


def _loo_trial(args):
    setup, master_seed, trial, tol = args
    rng = child_rng(master_seed, _TRIAL, trial)
    x, y = sample_points(setup.n, setup.beta_star, setup.scales, rng)
    gram = x @ x.T
    try:
        c, _, _ = train_gram(gram, y, setup.lam, setup.p, tol)
    except TrainingError:
        return None
    out = []
    for probe in setup.probes:
        cross = x @ probe.x
        test_out = float(cross @ c)
        aug = np.empty((setup.n + 1, setup.n + 1))
        aug[:-1, :-1] = gram
        aug[:-1, -1] = aug[-1, :-1] = cross
        aug[-1, -1] = probe.x @ probe.x
        try:
            ca, _, _ = train_gram(aug, np.append(y, probe.y), setup.lam, setup.p, tol)
        except TrainingError:
            return None
        out.append((float(aug[-1] @ ca), test_out))
    return out


@dataclass
class LeaveOneOutResult:
    setup: LabSetup
    train_outputs: list  # one array per probe
    test_outputs: list
    failed: int
    trial_ids: np.ndarray


def leave_one_out_experiment(spec, n, trials, master_seed, n_probes=4,
                             workers=None, tolerance=1e-8, setup=None):
    """Outputs on fixed probes from models trained with and without each probe.

    Every trial draws a fresh background sample; the model without the probe
    is shared by all probes of that trial.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    setup = setup or make_setup(spec, n, master_seed, n_probes)
    workers = default_workers() if workers is None else workers
    results = _map_trials(_loo_trial, [(setup, master_seed, t, tolerance) for t in range(trials)],
                          workers)
    ok = [t for t, r in enumerate(results) if r is not None]
    _check_failures(trials - len(ok), trials)
    k = len(setup.probes)
    train = [np.array([results[t][j][0] for t in ok]) for j in range(k)]
    test = [np.array([results[t][j][1] for t in ok]) for j in range(k)]
    return LeaveOneOutResult(setup, train, test, trials - len(ok), np.array(ok))


def _mi_model(args):
    setup, master_seed, model, tol, null = args
    rng = child_rng(master_seed, _MODEL, model)
    x, y = sample_points(setup.n, setup.beta_star, setup.scales, rng)
    xo, yo = sample_points(setup.n, setup.beta_star, setup.scales, rng)
    try:
        c, _, _ = train_gram(x @ x.T, y, setup.lam, setup.p, tol)
    except TrainingError:
        return None
    beta = x.T @ c
    if null:
        # "members" become a second fresh sample, so both arms share one law
        x, y = sample_points(setup.n, setup.beta_star, setup.scales, rng)
    zin, zout = x @ beta, xo @ beta
    return {"member": logistic_loss(y, zin), "nonmember": logistic_loss(yo, zout),
            "member_outputs": zin, "nonmember_outputs": zout,
            "member_labels": y, "nonmember_labels": yo}


def run_mi_experiment(spec, n, n_models, master_seed, workers=None, tolerance=1e-8,
                      null=False):
    """Train ``n_models`` independent models; record member and fresh non-member losses.

    With ``null=True`` the member arm is replaced by another fresh sample.
    """
    if n_models < 1:
        raise ValueError("need at least one model")
    setup = make_setup(spec, n, master_seed)
    workers = default_workers() if workers is None else workers
    results = _map_trials(_mi_model, [(setup, master_seed, m, tolerance, null) for m in range(n_models)],
                          workers)
    _check_failures(sum(r is None for r in results), n_models)
    return [r for r in results if r is not None]


def _shadow_model(args):
    setup, pool_x, pool_y, gram, master_seed, model, tol = args
    rng = child_rng(master_seed, _SPLIT, model)
    size = pool_x.shape[0]
    member = np.zeros(size, dtype=bool)
    member[rng.choice(size, size // 2, replace=False)] = True
    idx = np.flatnonzero(member)
    try:
        c, _, _ = train_gram(gram[np.ix_(idx, idx)], pool_y[idx], setup.lam, setup.p, tol)
    except TrainingError:
        return None
    z = gram[:, idx] @ c
    return logistic_loss(pool_y, z), member


def run_shadow_experiment(spec, n, n_shadow, n_target, master_seed, workers=None,
                          tolerance=1e-8):
    """Models trained on random halves of a fixed pool of 2n points.

    Returns ``(losses, membership)``, each of shape (models, 2n); the first
    ``n_shadow`` rows are shadow models, the rest are targets.
    """
    setup = make_setup(spec, n, master_seed)
    rng = child_rng(master_seed, _POOL)
    pool_x, pool_y = sample_points(2 * n, setup.beta_star, setup.scales, rng)
    gram = pool_x @ pool_x.T
    total = n_shadow + n_target
    workers = default_workers() if workers is None else workers
    args = [(setup, pool_x, pool_y, gram, master_seed, m, tolerance) for m in range(total)]
    results = _map_trials(_shadow_model, args, workers)
    _check_failures(sum(r is None for r in results), total)
    keep = [r for r in results if r is not None]
    shadow_rows = sum(r is not None for r in results[:n_shadow])
    losses = np.array([r[0] for r in keep])
    member = np.array([r[1] for r in keep])
    return losses, member, shadow_rows


def _error_model(args):
    setup, master_seed, model, n_test, tol = args
    rng = child_rng(master_seed, _ERROR, model)
    x, y = sample_points(setup.n, setup.beta_star, setup.scales, rng)
    try:
        c, _, _ = train_gram(x @ x.T, y, setup.lam, setup.p, tol)
    except TrainingError:
        return None
    beta = x.T @ c
    wrong = 0
    # fresh points in blocks to bound memory at large p
    for start in range(0, n_test, 2000):
        xt, yt = sample_points(min(2000, n_test - start), setup.beta_star, setup.scales, rng)
        wrong += int(np.sum((xt @ beta > 0) != (yt > 0.5)))
    return wrong / n_test


def empirical_test_error(spec, n, n_models, n_test, master_seed, workers=None, tolerance=1e-8):
    """Misclassification rate of independently trained models on fresh data, one per model."""
    if n_models < 1 or n_test < 1:
        raise ValueError("need at least one model and one test point")
    setup = make_setup(spec, n, master_seed)
    workers = default_workers() if workers is None else workers
    args = [(setup, master_seed, m, n_test, tolerance) for m in range(n_models)]
    results = _map_trials(_error_model, args, workers)
    _check_failures(sum(r is None for r in results), n_models)
    return np.array([r for r in results if r is not None])
