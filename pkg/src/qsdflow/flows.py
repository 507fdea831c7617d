"""Flow computation for branching mechanisms.

The cumulant flow u(t, lambda) solves du/dt = -Psi(u), u(0, lambda) = lambda,
and characterizes the semigroup through E_x[exp(-lambda Z_t)] = exp(-x u(t,
lambda)). Two independent backends are provided:

* ``phi_inversion`` integrates 1/Psi once (the exponent Phi) and inverts the
  exact identity Phi(u(t, lambda)) = t + Phi(lambda); it never steps through
  stiffness and is the reference backend.
* ``ode`` integrates the autonomous equation with adaptive stiff-safe
  stepping; it exists for independent validation.

Also computed here: the survival exponent a_t = u(t, 0+) (explosive case,
P_x(T > t) = exp(-x a_t)), the extinction exponent v(t) = u(t, +inf)
(P_x(T <= t) = exp(-x v(t))), the linear drift coefficient d_t of
u(t, .), and the scaling function f(t) used by the rescaled conditional
limit, defined as the exact root of Psi(1/f) f = Psi(a_t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

from scipy import integrate as _si
from scipy.optimize import brentq

from .errors import ContractError, NumericError
from .mechanisms import (
    BranchingMechanism,
    General,
    LinearDrift,
    LinearStableMinus,
    StableMinus,
    StablePlus,
    TruncatedPareto,
    classify,
    psi_eval,
)

__all__ = [
    "FlowConfig",
    "FlowResult",
    "DEFAULT_FLOW_CONFIG",
    "phi_explosive",
    "phi_extinction",
    "u_flow",
    "a_of_t",
    "v_of_t",
    "drift_dt",
    "scaling_f",
]

_BACKENDS = ("ode", "phi_inversion", "cross_check")


@dataclass(frozen=True)
class FlowConfig:
    """Accuracy targets and backend selection for flow evaluations."""

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_steps: int = 100_000
    backend: str = "phi_inversion"

    def __post_init__(self):
        if not (0.0 < self.rel_tol < 1e-2 and 0.0 < self.abs_tol < 1e-2):
            raise ContractError("tolerances must lie in (0, 1e-2)")
        if self.max_steps < 1000:
            raise ContractError("max_steps must be at least 1000")
        if self.backend not in _BACKENDS:
            raise ContractError(f"backend must be one of {_BACKENDS}")


DEFAULT_FLOW_CONFIG = FlowConfig()


@dataclass(frozen=True)
class FlowResult:
    """A flow value with accuracy metadata."""

    value: float
    achieved_error_estimate: float
    backend_used: str
    agreement_gap: float | None = None


@lru_cache(maxsize=None)
def _classification(mech: BranchingMechanism):
    return classify(mech)


# ---------------------------------------------------------------------------
# The exponent Phi
# ---------------------------------------------------------------------------

_QUAD_OPTS = dict(epsabs=1e-14, epsrel=1e-12, limit=300)


def _quad(fn, lo, hi) -> float:
    val, err = _si.quad(fn, lo, hi, **_QUAD_OPTS)
    if not math.isfinite(val):
        raise NumericError(f"quadrature returned {val} on [{lo}, {hi}]")
    return val


@lru_cache(maxsize=65536)
def _phi_explosive_quad(mech: BranchingMechanism, lam: float) -> float:
    # integral_0^lam du / (-Psi(u)); the origin has -Psi ~ |c0| u^{p0} with
    # p0 < 1, so u = s^(1/(1-p0)) regularizes the endpoint exactly.
    p0, _ = mech.zero_exponent()
    m = 1.0 / (1.0 - p0)
    u0 = min(lam, 1.0)

    def integrand_sub(s: float) -> float:
        return m * s ** (m - 1.0) / (-psi_eval(mech, s**m))

    val = _quad(integrand_sub, 0.0, u0 ** (1.0 / m))
    if lam > u0:
        val += _quad(lambda u: 1.0 / (-psi_eval(mech, u)), u0, lam)
    return val


def phi_explosive(mech: BranchingMechanism, lam: float) -> float:
    """Explosion-side exponent Phi(lambda) = integral_0^lambda du/(-Psi(u)).

    Defined for almost surely explosive mechanisms; increasing, Phi(0) = 0.
    """
    cls = _classification(mech)
    if not cls.almost_sure_explosion:
        raise ContractError("explosion-side exponent requires an almost surely explosive mechanism")
    if not lam >= 0.0:
        raise ContractError(f"lambda must be nonnegative, got {lam}")
    lam = float(lam)
    if lam == 0.0:
        return 0.0
    if isinstance(mech, StableMinus):
        return lam**mech.alpha / (mech.alpha * mech.k)
    if isinstance(mech, LinearStableMinus):
        a = mech.alpha
        return math.log1p((mech.c / mech.k) * lam**a) / (a * mech.c)
    return _phi_explosive_quad(mech, lam)


@lru_cache(maxsize=65536)
def _phi_extinction_quad(mech: BranchingMechanism, lam: float) -> float:
    # integral_lam^inf du/Psi(u) mapped through u = 1/w, then w = s^m with
    # m = 1/(p_inf - 1) to absorb the w^{p_inf - 2} endpoint singularity.
    p_inf, _ = mech.inf_exponent()
    m = 1.0 / (p_inf - 1.0)

    def integrand(s: float) -> float:
        w = s**m
        return m * s ** (m - 1.0) / (w * w * psi_eval(mech, 1.0 / w))

    return _quad(integrand, 0.0, (1.0 / lam) ** (1.0 / m))


def phi_extinction(mech: BranchingMechanism, lam: float) -> float:
    """Extinction-side exponent Phi(lambda) = integral_lambda^inf du/Psi(u).

    Requires finite extinction times (superlinear growth of Psi) and
    lambda > q so the integrand stays positive.
    """
    cls = _classification(mech)
    if not cls.extinction_time_finite:
        raise ContractError(
            "extinction-side exponent requires a mechanism with finite extinction times"
        )
    if not lam > cls.q:
        raise ContractError(f"lambda must exceed the root q = {cls.q}, got {lam}")
    lam = float(lam)
    if isinstance(mech, StablePlus):
        return lam ** (-mech.alpha) / (mech.c * mech.alpha)
    return _phi_extinction_quad(mech, lam)


# ---------------------------------------------------------------------------
# Monotone inversion helpers
# ---------------------------------------------------------------------------


def _invert_monotone(fn, target: float, increasing: bool, lo: float = 1e-12, hi: float = 1.0):
    """Solve fn(u) = target for a strictly monotone fn on (0, inf).

    The bracket grows geometrically from [1e-12, 1]; more than 400 doublings
    on either side is a numeric error.
    """
    sign = 1.0 if increasing else -1.0

    f_hi = sign * fn(hi)
    for _ in range(400):
        if f_hi >= sign * target:
            break
        hi *= 2.0
        f_hi = sign * fn(hi)
    else:
        raise NumericError(f"bracket expansion failed upward at {hi}")

    f_lo = sign * fn(lo)
    for _ in range(400):
        if f_lo <= sign * target:
            break
        lo /= 2.0
        f_lo = sign * fn(lo)
    else:
        raise NumericError(f"bracket expansion failed downward at {lo}")

    if f_lo == sign * target:
        return lo
    return float(brentq(lambda u: fn(u) - target, lo, hi, xtol=1e-300, rtol=9e-16, maxiter=300))


# ---------------------------------------------------------------------------
# Absorption exponents and drift
# ---------------------------------------------------------------------------


def a_of_t(mech: BranchingMechanism, t: float) -> float:
    """Survival exponent a_t: the inverse of Phi on the explosion side.

    P_x(T > t) = exp(-x a_t) for an almost surely explosive mechanism.
    """
    cls = _classification(mech)
    if not cls.almost_sure_explosion:
        raise ContractError("survival exponent requires an almost surely explosive mechanism")
    if not t >= 0.0:
        raise ContractError(f"t must be nonnegative, got {t}")
    t = float(t)
    if t == 0.0:
        return 0.0
    try:
        if isinstance(mech, StableMinus):
            return (mech.alpha * mech.k * t) ** (1.0 / mech.alpha)
        if isinstance(mech, LinearStableMinus):
            a = mech.alpha
            return ((mech.k / mech.c) * math.expm1(a * mech.c * t)) ** (1.0 / a)
    except OverflowError:
        raise NumericError(f"survival exponent overflows double precision at t={t}") from None
    return _invert_monotone(lambda u: phi_explosive(mech, u), t, increasing=True)


def v_of_t(mech: BranchingMechanism, t: float) -> float:
    """Extinction exponent v(t) = u(t, +inf): P_x(T <= t) = exp(-x v(t)).

    Decreasing from +inf to q; defined when extinction times are finite.
    """
    cls = _classification(mech)
    if not cls.extinction_time_finite:
        raise ContractError("extinction exponent requires finite extinction times")
    if not t > 0.0:
        raise ContractError(f"t must be positive, got {t}")
    t = float(t)
    if isinstance(mech, StablePlus):
        return (mech.c * mech.alpha * t) ** (-1.0 / mech.alpha)
    return _invert_monotone(lambda u: phi_extinction(mech, u), t, increasing=False)


def drift_dt(mech: BranchingMechanism, t: float) -> float:
    """Linear coefficient d_t of lambda -> u(t, lambda) at lambda = +inf.

    exp(-D t) for finite-variation mechanisms and 0 otherwise (t > 0);
    d_0 = 1 always. Multiplicative: d_{t+s} = d_t d_s.
    """
    if not t >= 0.0:
        raise ContractError(f"t must be nonnegative, got {t}")
    t = float(t)
    if t == 0.0:
        return 1.0
    if not mech.finite_variation:
        return 0.0
    try:
        return math.exp(-mech.drift_D * t)
    except OverflowError:
        raise NumericError(f"drift coefficient overflows double precision at t={t}") from None


def scaling_f(mech: BranchingMechanism, t: float) -> float:
    """Scaling function f(t): the exact root of Psi(1/f) f = Psi(a_t).

    Defined for the stable-jump families (Psi(+inf) = -inf with declared
    regular variation); the map f -> Psi(1/f) f is strictly decreasing, so
    the root is unique whenever it exists.
    """
    if not isinstance(mech, (StableMinus, LinearStableMinus)):
        raise ContractError(
            "scaling function requires a stable-jump mechanism with Psi(+inf) = -inf"
        )
    if not t > 0.0:
        raise ContractError(f"t must be positive, got {t}")
    t = float(t)
    a = mech.alpha
    if isinstance(mech, StableMinus):
        # -k f^alpha = -k a_t^{1-alpha} solves in closed form
        return (a * mech.k * t) ** ((1.0 - a) / (a * a))
    at = a_of_t(mech, t)
    # -c - k f^alpha = Psi(a_t) gives k f^alpha = c (a_t - 1) + k a_t^{1-alpha}
    rhs = mech.c * (at - 1.0) + mech.k * at ** (1.0 - a)
    if rhs <= 0.0:
        raise NumericError(
            "no scaling solution at this t: the defining map is bounded above by -c"
        )
    return (rhs / mech.k) ** (1.0 / a)


# ---------------------------------------------------------------------------
# The flow itself
# ---------------------------------------------------------------------------


def _u_closed_form(mech: BranchingMechanism, t: float, lam: float):
    try:
        if isinstance(mech, StablePlus):
            a = mech.alpha
            return (lam ** (-a) + mech.c * a * t) ** (-1.0 / a)
        if isinstance(mech, StableMinus):
            a = mech.alpha
            return (lam**a + a * mech.k * t) ** (1.0 / a)
        if isinstance(mech, LinearStableMinus):
            a, c, k = mech.alpha, mech.c, mech.k
            return ((lam**a + k / c) * math.exp(a * c * t) - k / c) ** (1.0 / a)
        if isinstance(mech, LinearDrift):
            return lam * math.exp(-mech.D * t)
    except OverflowError:
        raise NumericError(f"flow value overflows double precision at t={t}") from None
    return None


def _u_phi_inversion(mech: BranchingMechanism, t: float, lam: float) -> float:
    closed = _u_closed_form(mech, t, lam)
    if closed is not None:
        return closed
    cls = _classification(mech)
    if cls.almost_sure_explosion:
        target = t + phi_explosive(mech, lam)
        return _invert_monotone(
            lambda u: phi_explosive(mech, u), target, increasing=True, lo=lam, hi=max(lam, 1.0)
        )
    if cls.extinction_time_finite:
        target = t + phi_extinction(mech, lam)
        return _invert_monotone(
            lambda u: phi_extinction(mech, u),
            target,
            increasing=False,
            lo=min(lam, 1.0),
            hi=lam,
        )
    raise ContractError(
        "phi-inversion backend requires an almost surely explosive mechanism or "
        "one with finite extinction times; use the ode backend"
    )


def _u_ode(mech: BranchingMechanism, t: float, lam: float, cfg: FlowConfig) -> float:
    # solve tighter than advertised so cross_check headroom is real
    rtol = max(cfg.rel_tol * 1e-2, 2.5e-14)
    atol = cfg.abs_tol * 1e-2
    sol = _si.solve_ivp(
        lambda _s, y: [-psi_eval(mech, max(y[0], 0.0))],
        (0.0, t),
        [lam],
        method="LSODA",
        rtol=rtol,
        atol=atol,
        dense_output=False,
    )
    if not sol.success:
        raise NumericError(f"ode backend failed at t={t}, lambda={lam}: {sol.message}")
    val = float(sol.y[0, -1])
    if not math.isfinite(val):
        raise NumericError(f"ode backend diverged at t={t}, lambda={lam}")
    return max(val, 0.0)


def u_flow(
    mech: BranchingMechanism, t: float, lam: float, cfg: FlowConfig = DEFAULT_FLOW_CONFIG
) -> FlowResult:
    """Evaluate the flow u(t, lambda) with the configured backend.

    lambda = 0 is allowed only for almost surely explosive mechanisms and
    returns the survival exponent a_t; infinite lambda is rejected (the
    extinction exponent has its own entry point, v_of_t).
    """
    if not t >= 0.0:
        raise ContractError(f"t must be nonnegative, got {t}")
    if math.isinf(lam):
        raise ContractError("infinite lambda is only meaningful for v_of_t")
    if not lam >= 0.0:
        raise ContractError(f"lambda must be nonnegative, got {lam}")
    t, lam = float(t), float(lam)

    if lam == 0.0:
        cls = _classification(mech)
        if not cls.almost_sure_explosion:
            raise ContractError("lambda = 0 requires an almost surely explosive mechanism")
        # the boundary orbit u(t, 0+) = a_t is not reachable by the ODE
        # (0 is a fixed point of the vector field), so both backends report it
        value = a_of_t(mech, t)
        return FlowResult(value, max(cfg.abs_tol, cfg.rel_tol * value), cfg.backend)

    if t == 0.0:
        return FlowResult(lam, 0.0, cfg.backend)

    if cfg.backend == "ode":
        value = _u_ode(mech, t, lam, cfg)
        err = max(cfg.abs_tol, cfg.rel_tol * abs(value))
        return FlowResult(value, err, "ode")
    if cfg.backend == "phi_inversion":
        value = _u_phi_inversion(mech, t, lam)
        err = max(cfg.abs_tol, cfg.rel_tol * abs(value))
        return FlowResult(value, err, "phi_inversion")

    ref = _u_phi_inversion(mech, t, lam)
    alt = _u_ode(mech, t, lam, cfg)
    gap = abs(alt - ref) / max(abs(ref), cfg.abs_tol)
    if gap > 10.0 * cfg.rel_tol:
        raise NumericError(
            f"backend disagreement {gap:.3e} exceeds 10 * rel_tol at t={t}, lambda={lam}"
        )
    return FlowResult(ref, max(cfg.abs_tol, cfg.rel_tol * abs(ref)), "cross_check", gap)
