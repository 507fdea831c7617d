"""Quasi-stationary distributions, conditional laws, and limit theorems.

Everything here is at the level of Laplace transforms. The two QSD regimes:

* explosive: for an almost surely explosive mechanism, conditioning on
  non-explosion yields the family with transform exp(-beta Phi(lambda)),
  one QSD per decay rate beta > 0.
* extinction: when extinction times are finite, conditioning on
  non-extinction yields 1 - exp(-beta Phi_ext(lambda)) for decay rates
  0 < beta <= Psi'(0+); faster rates admit no QSD.

The limit evaluators cover the conditional laws themselves (exact via the
flow), their t -> infinity limits, the critical Yaglom tail, the critical
small-value limit, and the Q-process finite-dimensional transforms. The
scaled limits at extreme horizons are evaluated in high-precision
arithmetic because the survival exponent overflows doubles long before the
scaled transform stops being informative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath as mp

from .errors import ContractError
from .flows import a_of_t, phi_explosive, phi_extinction, u_flow
from .mechanisms import (
    BranchingMechanism,
    LinearStableMinus,
    StableMinus,
    classify,
    psi_eval,
)

__all__ = [
    "QsdSpec",
    "LimitQuery",
    "qsd_laplace",
    "conditional_laplace_explosive",
    "limit_thm1i",
    "limit_thm3",
    "limit_prop4",
    "yaglom_critical",
    "qprocess_fdd_laplace",
    "qprocess_prelimit",
    "thm3_scaled_gap",
    "thm3_scaled_gap_log10",
    "thm3_f_ratio",
]

_REGIMES = ("explosive", "extinction")
_LIMITS = ("thm1i", "thm1ii", "thm3", "prop4", "yaglom_critical", "qprocess")


@dataclass(frozen=True)
class QsdSpec:
    """A quasi-stationary distribution: mechanism, decay rate, regime."""

    mech: BranchingMechanism
    beta: float
    regime: str

    def __post_init__(self):
        if self.regime not in _REGIMES:
            raise ContractError(f"regime must be one of {_REGIMES}")
        if not self.beta > 0.0:
            raise ContractError(f"decay rate beta must be positive, got {self.beta}")
        cls = classify(self.mech)
        if self.regime == "explosive":
            if not cls.almost_sure_explosion:
                raise ContractError(
                    "explosive-regime QSDs require an almost surely explosive mechanism"
                )
        else:
            if not cls.extinction_time_finite:
                raise ContractError("extinction-regime QSDs require finite extinction times")
            bstar = cls.psi_prime_zero
            if not self.beta <= bstar:
                raise ContractError(
                    f"no extinction-regime QSD with decay rate {self.beta}: "
                    f"rates above Psi'(0+) = {bstar} are not attainable"
                )


@dataclass(frozen=True)
class LimitQuery:
    """A grid request for one of the named limit laws."""

    x: float
    t: float
    lambda_grid: tuple
    which_limit: str

    def __post_init__(self):
        if not self.x > 0.0:
            raise ContractError("initial mass x must be positive")
        if not self.t > 0.0:
            raise ContractError("t must be positive")
        object.__setattr__(self, "lambda_grid", tuple(float(v) for v in self.lambda_grid))
        grid = self.lambda_grid
        if len(grid) == 0:
            raise ContractError("lambda grid must be nonempty")
        if any(not v > 0.0 for v in grid):
            raise ContractError("lambda grid must be positive")
        if any(a >= b for a, b in zip(grid, grid[1:])):
            raise ContractError("lambda grid must be strictly increasing")
        if self.which_limit not in _LIMITS:
            raise ContractError(f"which_limit must be one of {_LIMITS}")


def qsd_laplace(spec: QsdSpec, lam: float) -> float:
    """Laplace transform of the QSD at lambda.

    Explosive regime: exp(-beta Phi(lambda)). Extinction regime:
    1 - exp(-beta Phi_ext(lambda)). Both are 1 at lambda = 0 (the
    extinction transform by its monotone limit) and nonincreasing.
    """
    if not lam >= 0.0:
        raise ContractError(f"lambda must be nonnegative, got {lam}")
    if lam == 0.0:
        return 1.0
    if spec.regime == "explosive":
        return math.exp(-spec.beta * phi_explosive(spec.mech, lam))
    return -math.expm1(-spec.beta * phi_extinction(spec.mech, lam))


def conditional_laplace_explosive(
    mech: BranchingMechanism, x: float, t: float, lam: float
) -> float:
    """Exact conditional transform E_x[exp(-lambda Z_t) | T > t].

    Equals exp(-x (u(t, lambda) - a_t)); the conditioning event is
    non-explosion by time t.
    """
    if not x > 0.0:
        raise ContractError(f"initial mass x must be positive, got {x}")
    cls = classify(mech)
    if not cls.almost_sure_explosion:
        raise ContractError("conditional transform requires an almost surely explosive mechanism")
    u = u_flow(mech, t, lam).value
    return math.exp(-x * (u - a_of_t(mech, t)))


def limit_thm1i(mech: BranchingMechanism, x: float, lam: float) -> float:
    """Limiting conditional transform when Psi(+inf) is finite.

    Returns exp(-x nu(0, inf) Phi(lambda)): the conditional law converges
    to the QSD with decay rate beta = x nu(0, inf).
    """
    if not x > 0.0:
        raise ContractError(f"initial mass x must be positive, got {x}")
    cls = classify(mech)
    if not cls.almost_sure_explosion:
        raise ContractError("limit requires an almost surely explosive mechanism")
    if math.isinf(cls.psi_infinity):
        raise ContractError(
            "Psi(+inf) = -inf makes the limiting conditional law trivial; "
            "there is no nondegenerate limit to evaluate"
        )
    return math.exp(-x * mech.nu_mass() * phi_explosive(mech, lam))


def limit_thm3(x: float, alpha: float, lam: float) -> float:
    """Scaled limit exp(-x lambda^alpha / alpha) for regularly varying Psi."""
    if not x > 0.0:
        raise ContractError(f"initial mass x must be positive, got {x}")
    if not 0.0 < alpha < 1.0:
        raise ContractError(f"alpha must lie in (0, 1), got {alpha}")
    if not lam >= 0.0:
        raise ContractError(f"lambda must be nonnegative, got {lam}")
    return math.exp(-x * lam**alpha / alpha)


def limit_prop4(alpha: float, lam: float) -> float:
    """Critical small-value limit 1 - (1 + lambda^{-alpha})^{-1/alpha}.

    alpha = 1 reduces algebraically to 1 / (1 + lambda).
    """
    if not 0.0 < alpha <= 1.0:
        raise ContractError(f"alpha must lie in (0, 1], got {alpha}")
    if not lam > 0.0:
        raise ContractError(f"lambda must be positive, got {lam}")
    return 1.0 - (1.0 + lam**-alpha) ** (-1.0 / alpha)


def yaglom_critical(mech: BranchingMechanism, z: float) -> float:
    """Critical Yaglom tail: lim P_x(Z_t / t >= z | T > t) = exp(-2z / Psi''(0+))."""
    if not z >= 0.0:
        raise ContractError(f"z must be nonnegative, got {z}")
    cls = classify(mech)
    if cls.criticality != "critical":
        raise ContractError("Yaglom tail requires a critical mechanism")
    s2 = cls.psi_second_zero
    if math.isinf(s2):
        raise ContractError("Yaglom tail requires Psi''(0+) < inf")
    return math.exp(-2.0 * z / s2)


def qprocess_fdd_laplace(mech: BranchingMechanism, x: float, times, lambdas) -> float:
    """Q-process finite-dimensional Laplace transform exp(-x sum lambda_i exp(-D t_i)).

    The process conditioned on never exploding is the deterministic flow of
    the linear mechanism u -> D u; only finite-variation almost surely
    explosive mechanisms qualify.
    """
    if not x > 0.0:
        raise ContractError(f"initial mass x must be positive, got {x}")
    cls = classify(mech)
    if not cls.almost_sure_explosion:
        raise ContractError("Q-process requires an almost surely explosive mechanism")
    if not cls.finite_variation:
        raise ContractError("Q-process transform requires a finite-variation mechanism")
    times = tuple(float(t) for t in times)
    lambdas = tuple(float(v) for v in lambdas)
    if len(times) != len(lambdas):
        raise ContractError("times and lambdas must have the same length")
    if any(not t >= 0.0 for t in times):
        raise ContractError("times must be nonnegative")
    if any(a >= b for a, b in zip(times, times[1:])):
        raise ContractError("times must be strictly increasing")
    if any(not v > 0.0 for v in lambdas):
        raise ContractError("lambdas must be positive")
    total = 0.0
    for t, lam in zip(times, lambdas):
        try:
            total += lam * math.exp(-cls.D * t)
        except OverflowError:
            return 0.0
    return math.exp(-x * total)


def qprocess_prelimit(
    mech: BranchingMechanism, x: float, t: float, s: float, lam: float
) -> float:
    """One-marginal transform E_x[exp(-lambda Z_t) | T > t + s].

    Equals exp(-x [u(t, lambda + a_s) - a_{t+s}]); converges to the
    Q-process transform as the conditioning horizon s grows.
    """
    if not x > 0.0:
        raise ContractError(f"initial mass x must be positive, got {x}")
    if not s >= 0.0:
        raise ContractError(f"s must be nonnegative, got {s}")
    cls = classify(mech)
    if not cls.almost_sure_explosion:
        raise ContractError("prelimit requires an almost surely explosive mechanism")
    a_s = a_of_t(mech, s)
    if t == 0.0:
        return math.exp(-x * lam)
    u = u_flow(mech, t, lam + a_s).value
    return math.exp(-x * (u - a_of_t(mech, t + s)))


# ---------------------------------------------------------------------------
# High-precision evaluators for the scaled limit at extreme horizons
# ---------------------------------------------------------------------------


def _mp_flow_quantities(mech, t):
    """(a_t, f_t, delta(mu) = u(t, mu) - a_t) in mpmath arithmetic.

    The difference is evaluated through a_t expm1(log1p(r) / alpha) with
    r = (u^alpha - a_t^alpha) / a_t^alpha known in closed form; the direct
    subtraction would need thousands of digits at the horizons probed here.
    """
    alpha = mp.mpf(mech.alpha)
    t = mp.mpf(t)
    if isinstance(mech, StableMinus):
        k = mp.mpf(mech.k)
        akt = alpha * k * t
        a_t = akt ** (1 / alpha)
        f_t = akt ** ((1 - alpha) / alpha**2)

        def delta_of(mu):
            return a_t * mp.expm1(mp.log1p(mu**alpha / akt) / alpha)

        return a_t, f_t, delta_of
    if isinstance(mech, LinearStableMinus):
        c, k = mp.mpf(mech.c), mp.mpf(mech.k)
        growth = mp.e ** (alpha * c * t)
        a_t = ((k / c) * (growth - 1)) ** (1 / alpha)
        # exact root of Psi(1/f) f = Psi(a_t): k f^alpha = c (a_t - 1) + k a_t^{1-alpha}
        f_t = ((c * (a_t - 1) + k * a_t ** (1 - alpha)) / k) ** (1 / alpha)

        def delta_of(mu):
            r = mu**alpha * c / (k * (1 - 1 / growth))
            return a_t * mp.expm1(mp.log1p(r) / alpha)

        return a_t, f_t, delta_of
    raise ContractError("scaled-limit evaluation requires a stable-jump mechanism")


def _thm3_gap_mp(mech, x: float, t: float, lam: float):
    if not x > 0.0:
        raise ContractError(f"initial mass x must be positive, got {x}")
    if not t > 0.0:
        raise ContractError(f"t must be positive, got {t}")
    if not lam > 0.0:
        raise ContractError(f"lambda must be positive, got {lam}")
    # the prelimit gap decays like exp(-c t) for the linear family, so the
    # working precision has to grow with the horizon to resolve it at all
    dps = 80
    if isinstance(mech, LinearStableMinus):
        dps += int(0.49 * mech.c * t)
    with mp.workdps(dps):
        a_t, f_t, delta_of = _mp_flow_quantities(mech, t)
        delta = delta_of(mp.mpf(lam) / f_t)
        scaled = mp.e ** (-mp.mpf(x) * delta)
        limit = mp.e ** (-mp.mpf(x) * mp.mpf(lam) ** mp.mpf(mech.alpha) / mp.mpf(mech.alpha))
        return abs(scaled - limit)


def thm3_scaled_gap(mech: BranchingMechanism, x: float, t: float, lam: float) -> float:
    """|exp(-x (u(t, lambda/f(t)) - a_t)) - exp(-x lambda^alpha / alpha)|.

    Evaluated in high-precision arithmetic: at the horizons where the limit
    is probed, a_t itself overflows doubles while the scaled transform is
    still order one. Gaps below the double-precision underflow threshold
    round to 0.0; use thm3_scaled_gap_log10 to compare those.
    """
    return float(_thm3_gap_mp(mech, x, t, lam))


def thm3_scaled_gap_log10(mech: BranchingMechanism, x: float, t: float, lam: float) -> float:
    """log10 of the scaled-limit gap; -inf when the gap is exactly zero.

    The gap decays like exp(-c t) for the linear family, far below what a
    double can hold, so monotone-decrease checks compare this instead.
    """
    gap = _thm3_gap_mp(mech, x, t, lam)
    if gap == 0:
        return -math.inf
    return float(mp.log10(gap))


def thm3_f_ratio(mech: BranchingMechanism, t: float) -> float:
    """Ratio of the exact scaling function to its asymptotic closed form.

    StableMinus: f(t) / (alpha k t)^{(1-alpha)/alpha^2} (identically 1).
    LinearStableMinus: f(t) / ((k/c)^{(1-alpha)/alpha^2} exp(c t / alpha)).
    """
    if not t > 0.0:
        raise ContractError(f"t must be positive, got {t}")
    with mp.workdps(80):
        _, f_t, _ = _mp_flow_quantities(mech, t)
        alpha = mp.mpf(mech.alpha)
        if isinstance(mech, StableMinus):
            ref = (alpha * mp.mpf(mech.k) * mp.mpf(t)) ** ((1 - alpha) / alpha**2)
        else:
            c, k = mp.mpf(mech.c), mp.mpf(mech.k)
            ref = (k / c) ** ((1 - alpha) / alpha**2) * mp.e ** (c * mp.mpf(t) / alpha)
        return float(f_t / ref)
