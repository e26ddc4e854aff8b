"""Test error, membership advantage and the lambda tuning/sweep logic built on them."""

from dataclasses import dataclass
import logging
import math
import warnings

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.special import expit, ndtr

from . import scalar
from .errors import BilevelMIError, IntegrationError, InvalidArgumentError
from .solver import BiLevelSpec, solve

log = logging.getLogger(__name__)

# half-width of the window around each density's bulk, in noise units
_WINDOW = 12.0
_GRID_POINTS = 600
_BISECT_STEPS = 80


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


@dataclass(frozen=True)
class SampleContext:
    """A probe point: clean margin x'beta* and the label it was trained with."""

    z_star: float
    y: int

    def __post_init__(self):
        if not math.isfinite(self.z_star):
            raise InvalidArgumentError("z_star must be finite")
        if self.y not in (0, 1):
            raise InvalidArgumentError("y must be 0 or 1")


@dataclass(frozen=True)
class TradeoffPoint:
    spec: BiLevelSpec
    test_error: float
    advantage: float
    solve_residual: float


def density_test(state, ctx, z_hat):
    """Density of the probe's output under a model that did not train on it."""
    m = state.alpha * ctx.z_star
    return scalar.gaussian_pdf((np.asarray(z_hat, dtype=float) - m) / state.sigma) / state.sigma


def density_train(state, ctx, z_hat):
    """Density of the probe's output under a model trained on it (push-forward by the prox)."""
    z = np.asarray(z_hat, dtype=float)
    m = state.alpha * ctx.z_star
    g = scalar.label_map(state.gamma, ctx.y, z)
    jac = scalar.label_map_derivative(state.gamma, z)
    return scalar.gaussian_pdf((g - m) / state.sigma) * jac / state.sigma


def cdf_test(state, ctx, t):
    return scalar.gaussian_cdf((np.asarray(t, dtype=float) - state.alpha * ctx.z_star) / state.sigma)


def cdf_train(state, ctx, t):
    g = scalar.label_map(state.gamma, ctx.y, t)
    return scalar.gaussian_cdf((g - state.alpha * ctx.z_star) / state.sigma)


def _cdf_gap(gamma, y, sigma, m, t):
    """F_train(t) - F_test(t), computed from the upper tails when both CDFs are near 1."""
    t = np.asarray(t, dtype=float)
    a_train = (t + gamma * (expit(t) - y) - m) / sigma
    a_test = (t - m) / sigma
    upper = (a_train > 0) & (a_test > 0)
    lower_gap = ndtr(a_train) - ndtr(a_test)
    upper_gap = ndtr(-a_test) - ndtr(-a_train)
    return np.where(upper, upper_gap, lower_gap)


def _log_ratio(gamma, y, sigma, m, z):
    """log(mu_train / mu_test), written to stay finite far in the tails."""
    shift = gamma * (expit(z) - y)
    return np.log1p(gamma * scalar.rho_second(z)) - shift * (shift + 2.0 * (z - m)) / (2.0 * sigma ** 2)


def _support(gamma, y, sigma, m):
    """Intervals holding essentially all mass of the two densities."""
    test = (m - _WINDOW * sigma, m + _WINDOW * sigma)
    ends = scalar.prox_logistic(gamma, y, np.array(test))
    return test, (float(ends[0]), float(ends[1]))


def _scan_grid(gamma, y, sigma, m):
    test, train = _support(gamma, y, sigma, m)
    lo = min(test[0], train[0])
    hi = max(test[1], train[1])
    pieces = [np.linspace(lo, hi, _GRID_POINTS),
              np.linspace(*test, _GRID_POINTS),
              np.linspace(*train, _GRID_POINTS)]
    # rho'' lives on the unit scale around zero
    a, b = max(lo, -40.0), min(hi, 40.0)
    if a < b:
        pieces.append(np.linspace(a, b, max(_GRID_POINTS, int(20 * (b - a)))))
    return np.unique(np.concatenate(pieces))


def density_crossings(state, ctx):
    """Points where the train and test densities cross, with the crossing direction.

    Returns ``(points, signs)``; a sign of +1 marks the end of an interval on
    which the train density dominates.
    """
    gamma, y, sigma = state.gamma, ctx.y, state.sigma
    m = state.alpha * ctx.z_star
    grid = _scan_grid(gamma, y, sigma, m)
    pos = _log_ratio(gamma, y, sigma, m, grid) > 0
    idx = np.flatnonzero(pos[1:] != pos[:-1])
    if idx.size == 0:
        return np.empty(0), np.empty(0)
    lo, hi = grid[idx].copy(), grid[idx + 1].copy()
    lo_pos = pos[idx]
    for _ in range(_BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        same = (_log_ratio(gamma, y, sigma, m, mid) > 0) == lo_pos
        lo = np.where(same, mid, lo)
        hi = np.where(same, hi, mid)
        if np.all(hi - lo <= 1e-15 * np.maximum(1.0, np.abs(lo))):
            break
    return 0.5 * (lo + hi), np.where(lo_pos, 1.0, -1.0)


def _advantage_from_crossings(state, ctx):
    pts, signs = density_crossings(state, ctx)
    if pts.size == 0:
        return 0.0
    gap = _cdf_gap(state.gamma, ctx.y, state.sigma, state.alpha * ctx.z_star, pts)
    return float(np.clip(signs @ gap, 0.0, 1.0))


def _adaptive_simpson(f, a, b, tol, max_depth=50):
    """Adaptive Simpson quadrature of a vectorised ``f`` on [a, b]."""
    fa, fm, fb = f(np.array([a, 0.5 * (a + b), b]))
    whole = (b - a) / 6.0 * (fa + 4 * fm + fb)
    total = 0.0
    evals = 3
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    while stack:
        a, b, fa, fm, fb, whole, eps, depth = stack.pop()
        m = 0.5 * (a + b)
        flm, frm = f(np.array([0.5 * (a + m), 0.5 * (m + b)]))
        evals += 2
        left = (m - a) / 6.0 * (fa + 4 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4 * frm + fb)
        delta = left + right - whole
        if abs(delta) <= 15 * eps or depth >= max_depth:
            if depth >= max_depth and abs(delta) > 15 * eps:
                raise IntegrationError("adaptive Simpson hit its depth limit",
                                       {"interval": (a, b), "error": abs(delta) / 15, "evals": evals})
            total += left + right + delta / 15.0
        else:
            stack.append((a, m, fa, flm, fm, left, eps / 2, depth + 1))
            stack.append((m, b, fm, frm, fb, right, eps / 2, depth + 1))
    return total


def _advantage_simpson(state, ctx, tol=1e-9, half=False):
    """Integrate max(mu_train - mu_test, 0) (or half |difference|) directly."""
    m = state.alpha * ctx.z_star
    s = state.sigma + state.gamma
    lo, hi = m - _WINDOW * s, m + _WINDOW * s

    def f(z):
        d = density_train(state, ctx, z) - density_test(state, ctx, z)
        return 0.5 * np.abs(d) if half else np.maximum(d, 0.0)

    # seed panels over the bulk of both densities so no mass is stepped over
    test, train = _support(state.gamma, ctx.y, state.sigma, m)
    cuts = np.unique(np.concatenate([
        [lo, hi], np.linspace(*test, 49), np.linspace(*train, 49),
        np.linspace(max(lo, -40), min(hi, 40), 161) if max(lo, -40) < min(hi, 40) else []]))
    cuts = cuts[(cuts >= lo) & (cuts <= hi)]
    panel_tol = tol / len(cuts)
    return float(sum(_adaptive_simpson(f, a, b, panel_tol) for a, b in zip(cuts[:-1], cuts[1:])))


def advantage_sample(state, ctx, method="crossings"):
    """Optimal single-query membership advantage against one probe point.

    ``crossings`` locates where the two output densities cross and sums exact
    CDF differences; ``simpson`` integrates the positive part of their
    difference numerically and ``tv`` integrates half the absolute difference.
    """
    if state.gamma == 0.0:
        return 0.0
    if method == "crossings":
        return _advantage_from_crossings(state, ctx)
    if method == "simpson":
        return _advantage_simpson(state, ctx)
    if method == "tv":
        return _advantage_simpson(state, ctx, half=True)
    raise InvalidArgumentError(f"unknown method {method!r}")


def threshold_advantage(state, ctx, t, above=True):
    """Advantage of the rule 'member iff output > t' (or '< t' with ``above=False``)."""
    gap = _cdf_gap(state.gamma, ctx.y, state.sigma, state.alpha * ctx.z_star, t)
    return _out(-gap if above else gap)


def _outer_rule(state, sigma_beta):
    feats = [(0.0, 1.0 / sigma_beta)]
    if state.alpha > 0:
        feats.append((0.0, state.sigma / (state.alpha * sigma_beta)))
        feats.append((0.0, (state.sigma + state.gamma) / (state.alpha * sigma_beta)))
    return scalar.clustered_gaussian_rule(feats)


def advantage_average(state, sigma_beta, rule=None, labels="symmetric"):
    """Probe-averaged optimal advantage over Z' ~ N(0, sigma_beta^2) and its label.

    The model is invariant under (z, y) -> (-z, 1 - y), so adv(Z', 0) equals
    adv(-Z', 1) and the average reduces to 2 E[rho'(Z') adv(Z', 1)].
    ``labels="both"`` evaluates the two label branches separately instead.
    """
    if state.gamma == 0.0:
        return 0.0
    rule = rule or _outer_rule(state, sigma_beta)
    zs = sigma_beta * rule.nodes
    p1 = expit(zs)
    adv1 = np.array([_advantage_from_crossings(state, SampleContext(z, 1)) for z in zs])
    if labels == "symmetric":
        value = 2.0 * float(rule.weights @ (p1 * adv1))
    elif labels == "both":
        adv0 = np.array([_advantage_from_crossings(state, SampleContext(z, 0)) for z in zs])
        value = float(rule.weights @ (p1 * adv1 + (1.0 - p1) * adv0))
    else:
        raise InvalidArgumentError(f"unknown labels mode {labels!r}")
    return min(max(value, 0.0), 1.0)


def _error_rule(state, sigma_beta):
    feats = [(0.0, 1.0 / sigma_beta)]
    if state.alpha > 0:
        feats.append((0.0, state.sigma / (state.alpha * sigma_beta)))
    return scalar.clustered_gaussian_rule(feats)


def test_error(state, sigma_beta):
    """Misclassification rate 2 E[rho'(-Z) Phi(alpha Z / sigma)], Z ~ N(0, sigma_beta^2)."""
    rule = _error_rule(state, sigma_beta)
    z = sigma_beta * rule.nodes
    return float(2.0 * rule.weights @ (expit(-z) * ndtr(state.alpha * z / state.sigma)))


def test_error_half_form(state, sigma_beta):
    """E[rho'(Z) Phi(-alpha Z / sigma)]: half the misclassification rate."""
    rule = _error_rule(state, sigma_beta)
    z = sigma_beta * rule.nodes
    return float(rule.weights @ (expit(z) * ndtr(-state.alpha * z / state.sigma)))


def _loss_threshold_curve(state, sigma_beta, t):
    """Global loss-threshold advantage at margin thresholds ``t`` (population level).

    A point with label 1 is flagged when its margin exceeds t, i.e. its loss is
    below log(1 + e^-t); by label symmetry the label-0 half behaves the same.
    """
    rule = _outer_rule(state, sigma_beta)
    zs = sigma_beta * rule.nodes
    w = 2.0 * rule.weights * expit(zs)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    m = state.alpha * zs[None, :]
    g = t + state.gamma * (expit(t) - 1.0)
    f_test = ndtr((t[:, None] - m) / state.sigma)
    f_train = ndtr((g[:, None] - m) / state.sigma)
    return (f_test - f_train) @ w


def global_threshold_advantage(state, sigma_beta):
    """Best advantage of a single loss threshold shared by all points.

    Returns ``(advantage, loss_threshold)``.
    """
    span = _WINDOW * (state.sigma + state.gamma + state.alpha * sigma_beta)
    grid = np.linspace(-span, span, 4001)
    curve = _loss_threshold_curve(state, sigma_beta, grid)
    i = int(np.argmax(curve))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = minimize_scalar(lambda t: -_loss_threshold_curve(state, sigma_beta, t)[0],
                          bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    t_best = res.x if -res.fun >= curve[i] else grid[i]
    adv = max(-res.fun, curve[i])
    return float(adv), float(scalar.rho(-t_best))


def evaluate(spec, **solve_options):
    """Solve ``spec`` and return its (test error, advantage) point."""
    report = solve(spec, **solve_options)
    st = report.state
    return TradeoffPoint(spec, test_error(st, spec.sigma_beta),
                         advantage_average(st, spec.sigma_beta), report.residual)


def sweep(base, vary, grid, **solve_options):
    """One TradeoffPoint per grid value (``None`` where the solve failed).

    Use ``[p for p in sweep(...) if p is not None]`` for successes only;
    keeping the slots lets callers report per-point failures in grid order.
    """
    if vary not in ("lambda", "phi", "delta"):
        raise InvalidArgumentError(f"cannot sweep over {vary!r}")
    key = "lam" if vary == "lambda" else vary
    out = []
    for value in grid:
        try:
            out.append(evaluate(base.with_(**{key: float(value)}), **solve_options))
        except BilevelMIError as exc:
            log.warning("%s=%g failed: %s", vary, value, exc)
            out.append(None)
    return out


def tune_lambda(base, objective, grid, target=None, branch="high", points=None):
    """Pick a ridge strength from ``grid``.

    Objectives: ``min-error``; ``target-advantage`` (closest advantage, ties to
    the larger lambda); ``target-error`` (closest test error, restricted to the
    ``branch`` side of the error minimum: "high" for over-regularised lambdas).
    Precomputed ``points`` (aligned with ``grid``) skip the solves.
    """
    grid = [float(g) for g in grid]
    if not grid:
        raise InvalidArgumentError("empty lambda grid")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise InvalidArgumentError("lambda grid must be ascending")
    if objective in ("target-advantage", "target-error") and target is None:
        raise InvalidArgumentError(f"{objective} needs a target")
    if points is None:
        points = sweep(base, "lambda", grid)
    ok = [(lam, p) for lam, p in zip(grid, points) if p is not None]
    if not ok:
        raise BilevelMIError("every lambda on the grid failed to solve")
    if len(ok) < len(grid):
        warnings.warn(f"{len(grid) - len(ok)} lambda values skipped", RuntimeWarning)
    if objective == "min-error":
        return min(ok, key=lambda lp: lp[1].test_error)
    if objective == "target-advantage":
        # reversed so that min() keeps the larger lambda on ties
        return min(reversed(ok), key=lambda lp: abs(lp[1].advantage - target))
    if objective == "target-error":
        best = min(range(len(ok)), key=lambda i: ok[i][1].test_error)
        side = ok[best:] if branch == "high" else ok[:best + 1]
        return min(side, key=lambda lp: abs(lp[1].test_error - target))
    raise InvalidArgumentError(f"unknown objective {objective!r}")


def match_error(base, target, grid, branch="high", points=None, xtol=1e-6):
    """Ridge strength whose test error equals ``target`` on one branch of the error curve.

    The grid locates a bracketing pair of lambdas on the requested side of the
    error minimum; the crossing is then refined by root finding in log(lambda).
    Raises ``BilevelMIError`` when the target lies outside the branch's range.
    """
    grid = [float(g) for g in grid]
    if points is None:
        points = sweep(base, "lambda", grid)
    ok = [(lam, p) for lam, p in zip(grid, points) if p is not None]
    if len(ok) < 2:
        raise BilevelMIError("too few solved lambda values to bracket a target error")
    best = min(range(len(ok)), key=lambda i: ok[i][1].test_error)
    side = ok[best:] if branch == "high" else ok[:best + 1]
    errs = [p.test_error - target for _, p in side]
    for i, e in enumerate(errs):
        if e == 0.0:
            return side[i]
    for (a, pa), (b, pb), ea, eb in zip(side, side[1:], errs, errs[1:]):
        if ea * eb < 0:
            cache = {}

            def f(loglam):
                cache[loglam] = evaluate(base.with_(lam=math.exp(loglam)))
                return cache[loglam].test_error - target

            root = brentq(f, math.log(a), math.log(b), xtol=xtol)
            pt = cache.get(root) or evaluate(base.with_(lam=math.exp(root)))
            return math.exp(root), pt
    lo = min(p.test_error for _, p in side)
    hi = max(p.test_error for _, p in side)
    raise BilevelMIError(
        f"target error {target:.4g} outside the {branch} branch range [{lo:.4g}, {hi:.4g}]")
