"""Fixed-point solver for the bi-level order parameters of ridge logistic regression."""

from dataclasses import asdict, dataclass, replace
import logging
import math

import numpy as np

from . import kernels, scalar
from .errors import (
    ConvergenceError,
    DegenerateSigmaError,
    DegenerateSigmaTauError,
    InvalidArgumentError,
)

log = logging.getLogger(__name__)

FIELDS = ("alpha", "sigma", "gamma", "theta", "tau", "r")


@dataclass(frozen=True)
class BiLevelSpec:
    """Problem parameters: n/p, p/d, tail variance, signal scale, ridge strength."""

    delta: float
    phi: float
    eta: float
    sigma_beta: float
    lam: float

    def __post_init__(self):
        checks = {
            "delta": self.delta > 0,
            "phi": self.phi > 1,
            "eta": self.eta > 0,
            "sigma_beta": self.sigma_beta > 0,
            "lambda": self.lam > 0,
        }
        for name, ok in checks.items():
            value = self.lam if name == "lambda" else getattr(self, name)
            if not (ok and math.isfinite(value)):
                raise InvalidArgumentError(f"invalid {name}: {value!r}")

    @property
    def kappa(self):
        return self.sigma_beta

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class FixedPointState:
    alpha: float
    sigma: float
    gamma: float
    theta: float
    tau: float
    r: float

    def as_array(self):
        return np.array([getattr(self, f) for f in FIELDS])

    @classmethod
    def from_array(cls, values):
        return cls(*(float(v) for v in values))

    @property
    def sigma_tau(self):
        return self.sigma * self.tau

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class SolveReport:
    state: FixedPointState
    iterations: int
    residual: float
    converged: bool
    damping_used: float


DEFAULT_START = FixedPointState(1.0, 1.0, 1.0, 0.1, 1.0, 1.0)
LARGE_GAMMA_START = FixedPointState(1.0, 1.0, 100.0, 0.1, 1.0, 1.0)
SMALL_GAMMA_START = FixedPointState(1.0, 1.0, 0.01, 0.1, 1.0, 1.0)
_RECOVER_AFTER = 5

STARTS = (DEFAULT_START, LARGE_GAMMA_START, SMALL_GAMMA_START)


def rhs_head(spec, state):
    """Signal-side equations; returns ``(alpha, gamma, sigma)``."""
    d, phi, eta, lam, k = spec.delta, spec.phi, spec.eta, spec.lam, spec.kappa
    u = state.sigma_tau
    theta, r = state.theta, state.r
    head = phi + lam * u
    tail = phi + lam * u * (phi - 1.0) / eta
    alpha = u * theta / (1.0 + lam * u / phi)
    gamma = (u / d) * (1.0 / head + (phi - 1.0) / tail)
    rhs = (((u * theta * phi * k) ** 2 + u * u * r * r * phi / d) / head ** 2
           + u * u * r * r * (phi / d) * (phi - 1.0) / tail ** 2)
    signal = (k * alpha) ** 2
    if not rhs > signal:
        raise DegenerateSigmaError(rhs, signal)
    return alpha, gamma, math.sqrt(rhs - signal)


def _branch_points(gamma):
    """Real parts of the complex singularities of the y=0 prox nearest the real axis."""
    x = 2.0 * math.asinh(math.sqrt(gamma) / 2.0)
    if x == 0.0:
        return ()
    return (x - gamma / math.expm1(-x), -x - gamma / math.expm1(x))


def tail_rule(spec, state):
    """Outer rule in the rotated variable V/sd for the tail expectations."""
    k = spec.kappa
    sd = math.hypot(k * state.alpha, state.sigma)
    c = k * state.alpha / sd
    s = state.sigma / sd
    features = []
    if c > 0:
        features.append((0.0, math.sqrt(1.0 + (k * s) ** 2) / (k * c)))
    features.extend((v / sd, math.pi / sd) for v in _branch_points(state.gamma))
    return scalar.clustered_gaussian_rule(features), sd, k * c, k * s


def _tail_tensor(spec, state, rule):
    k = spec.kappa
    z1, z2 = rule.nodes[:, 0], rule.nodes[:, 1]
    p = kernels.prox_logistic_array(state.gamma, 0.0, k * state.alpha * z1 + state.sigma * z2)
    s = scalar.rho_prime(p)
    q = scalar.rho_second(p)
    a = scalar.rho_prime(-k * z1)
    b = scalar.rho_second(k * z1)
    w = rule.weights
    return (float(w @ (a * s * s)), float(w @ (b * s)),
            float(w @ (2.0 * a * q / (1.0 + state.gamma * q))))


def tail_moments(spec, state, rule=None):
    """Raw expectations ``(E4, E5, E6)`` behind the tail equations.

    Without ``rule`` the expectation over Z1 is folded analytically into a
    logistic-normal integral and only the prox argument is integrated
    numerically; a 2-D tensor rule instead evaluates the double integral
    directly (accurate only for moderate kappa).
    """
    if state.gamma <= 0:
        raise InvalidArgumentError("gamma must be positive")
    if rule is not None:
        if rule.dim != 2:
            raise InvalidArgumentError("an explicit tail rule must be 2-D")
        return _tail_tensor(spec, state, rule)
    outer, sd, mu_scale, tau = tail_rule(spec, state)
    gh = scalar._GH64
    return kernels.tail_moments(outer.nodes, outer.weights, sd, mu_scale, tau,
                                state.gamma, gh.nodes, gh.weights, *scalar._LOGISTIC)


def rhs_tail(spec, state, rule=None):
    """Loss-side equations; returns ``(r, theta, sigma_tau)``.

    The third equation is used in the rearranged form
    ``sigma*tau = 1 / E[2 rho'(-k Z1) q / (1 + gamma q)]``, which equals
    ``gamma / (1 - E6)`` but avoids cancellation when gamma is small.
    """
    e_r, e_theta, e_u = tail_moments(spec, state, rule)
    if not (e_u > 0 and math.isfinite(e_u)):
        raise DegenerateSigmaTauError(f"sigma*tau equation has no positive root (E={e_u!r})")
    return math.sqrt(2.0 * e_r), 2.0 * e_theta, 1.0 / e_u


def fixed_point_map(spec, state, rule=None):
    """One Gauss-Seidel sweep: tail equations, then head equations."""
    r, theta, u = rhs_tail(spec, state, rule)
    partial = replace(state, r=r, theta=theta, tau=u / state.sigma)
    alpha, gamma, sigma = rhs_head(spec, partial)
    return FixedPointState(alpha, sigma, gamma, theta, u / sigma, r)


def residual(old, new):
    a, b = old.as_array(), new.as_array()
    return float(np.max(np.abs(b - a) / np.maximum(1.0, np.abs(a))))


def solve(spec, tolerance=1e-9, max_iterations=10_000, damping=0.5,
          quadrature=None, start=None, min_damping=1.0 / 64, polish=1e-2):
    """Damped Picard iteration on the six order parameters.

    Iteration continues past ``tolerance`` down to ``polish * tolerance`` when
    that is reachable, so that runs from different starts agree to well within
    the tolerance; the reported residual is the fixed-point mismatch of the
    returned state.
    """
    if not tolerance > 0:
        raise InvalidArgumentError("tolerance must be positive")
    if not 0 < damping <= 1:
        raise InvalidArgumentError("damping must lie in (0, 1]")
    state = start or DEFAULT_START
    omega = damping
    best = (math.inf, state)
    prev_res = math.inf
    rises = falls = 0
    target = tolerance * polish
    stall = 0
    for it in range(1, max_iterations + 1):
        try:
            new = fixed_point_map(spec, state, quadrature)
        except (DegenerateSigmaError, DegenerateSigmaTauError) as exc:
            if omega <= min_damping:
                raise
            omega = max(omega / 2.0, min_damping)
            log.debug("degenerate step (%s); damping -> %g", exc, omega)
            state = best[1] if best[0] < math.inf else state
            continue
        res = residual(state, new)
        if not math.isfinite(res):
            raise ConvergenceError("non-finite iterate", best[0], best[1])
        if res < best[0]:
            best = (res, state)
            stall = 0
        else:
            stall += 1
        if res <= target or (res <= tolerance and stall >= 20):
            return SolveReport(state, it, res, True, omega)
        if res > prev_res:
            rises, falls = rises + 1, 0
        else:
            rises, falls = 0, falls + 1
        if rises >= 2 and omega > min_damping:
            omega = max(omega / 2.0, min_damping)
            rises = 0
        elif falls >= _RECOVER_AFTER and omega < damping:
            # transients far from the solution can trip the halving rule;
            # let the step grow back once progress is steady
            omega = min(2.0 * omega, damping)
            falls = 0
        prev_res = res
        mixed = (1.0 - omega) * state.as_array() + omega * new.as_array()
        state = FixedPointState.from_array(mixed)
    res, st = best
    if res <= tolerance:
        return SolveReport(st, max_iterations, res, True, omega)
    raise ConvergenceError(
        f"no convergence after {max_iterations} iterations (best residual {res:.3g})",
        res, st)


def solve_multistart(spec, starts=STARTS, **options):
    """Solve from several starts; returns the reports and their max disagreement."""
    reports = [solve(spec, start=s, **options) for s in starts]
    ref = reports[0].state
    spread = max(residual(ref, r.state) for r in reports[1:]) if len(reports) > 1 else 0.0
    return reports, spread


def closed_form_lambda_inf(spec):
    """Limit of alpha^2/sigma^2 as the ridge strength grows without bound."""
    theta = scalar.logistic_normal(0.0, spec.kappa, order=2)
    d, phi, eta = spec.delta, spec.phi, spec.eta
    ratio = 4.0 * theta ** 2 * d * phi / (1.0 + eta ** 2 / (phi - 1.0))
    return {"alpha_over_sigma_sq": ratio, "theta": theta}
