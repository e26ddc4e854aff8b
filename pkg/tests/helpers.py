"""Quadrature helpers shared by the metrics and acceptance tests."""

from scipy import integrate

from bilevel_mi import metrics, scalar


def integrate_density(f, lo, hi, points):
    """Adaptive quadrature of ``f`` on [lo, hi], split at the given interior points."""
    pts = sorted(p for p in points if lo < p < hi)
    edges = [lo, *pts, hi]
    return sum(integrate.quad(f, a, b, limit=400, epsabs=1e-13, epsrel=1e-13)[0]
               for a, b in zip(edges[:-1], edges[1:]))


def total_mass(state, ctx, which):
    """Mass of a density over +-40 test-law standard deviations around its centre.

    The train window is the test window pushed through the prox, with breakpoints at
    the images of m + k*sigma, so narrow peaks at large gamma are not stepped over.
    """
    m = state.alpha * ctx.z_star
    ks = range(-40, 41, 2) if which == "train" else (-40, -8, -2, 0, 2, 8, 40)
    pts = [m + k * state.sigma for k in ks]
    if which == "train":
        pts = [scalar.prox_logistic(state.gamma, ctx.y, v) for v in pts]
        dens = metrics.density_train
    else:
        dens = metrics.density_test
    pts = sorted(set(pts + [0.0]))
    return integrate_density(lambda z: dens(state, ctx, z), pts[0], pts[-1], pts[1:-1])
