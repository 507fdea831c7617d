"""Branching mechanisms: parametric families, evaluation, classification.

A branching mechanism is the convex function

    Psi(u) = gamma*u + (sigma2/2)*u**2
             + integral (exp(-u*h) - 1 + u*h*1_{h<1}) nu(dh)

over u >= 0, with a Levy measure nu satisfying integral (1 ^ h^2) nu(dh) < inf.
When sigma2 = 0 and integral_{(0,1)} h nu(dh) < inf (finite variation) it
rewrites as

    Psi(u) = D*u + integral (exp(-u*h) - 1) nu(dh),
    D = gamma + integral_{(0,1)} h nu(dh).

Each family carries exact closed forms plus declared asymptotic exponents of
Psi at 0+ and +inf; classification (criticality, extinction/explosion of the
lifetime, the largest root q of Psi) is decided analytically from those
exponents, never from raw quadrature, because quadrature cannot distinguish a
log-divergent endpoint from a slowly convergent one.

Conventions used throughout the package:

* extinction in finite time is possible iff integral^inf du/Psi(u) < inf,
* explosion in finite time is possible iff integral_{0+} du/(-Psi(u)) < inf,
* explosion is almost sure iff additionally q = inf (Psi < 0 everywhere).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Union

from scipy import special as _sp

from .errors import ContractError, UnsupportedClassificationError

__all__ = [
    "FiniteAtom",
    "ParetoTail",
    "StableDensity",
    "NuComponent",
    "StablePlus",
    "StableMinus",
    "LinearStableMinus",
    "TruncatedPareto",
    "LinearDrift",
    "General",
    "BranchingMechanism",
    "Classification",
    "JumpDecomposition",
    "classify",
    "psi_eval",
    "psi_derivatives",
    "mechanism_from_config",
    "mechanism_to_config",
    "load_mechanism",
]

_INF = math.inf


def _upper_gamma(s: float, x: float) -> float:
    """Upper incomplete gamma Gamma(s, x) for x > 0, s in (-2, 2]."""
    if x <= 0.0:
        raise ValueError("x must be positive")
    if s > 0.0:
        return math.gamma(s) * _sp.gammaincc(s, x)
    if s == 0.0:
        return float(_sp.exp1(x))
    # one-step recurrence: Gamma(s, x) = (Gamma(s+1, x) - x^s e^{-x}) / s
    return (_upper_gamma(s + 1.0, x) - x**s * math.exp(-x)) / s


def _tail_exp_integral(u: float, p: float, cut: float) -> float:
    """integral over (cut, inf) of (exp(-u*h) - 1) * h^{-1-p} dh, p in (0, 1].

    The closed form u^p Gamma(-p, u*cut) - cut^{-p}/p cancels catastrophically
    as u*cut -> 0, so a convergent series in x = u*cut takes over below x = 1.
    """
    if u == 0.0:
        return 0.0
    x = u * cut
    if x >= 1.0 or p == 1.0:
        return u**p * _upper_gamma(-p, x) - cut ** (-p) / p
    # cut^{-p} * (Gamma(-p) x^p - sum_{n>=1} (-x)^n / (n! (n - p)))
    acc = -math.gamma(1.0 - p) / p * x**p
    term = 1.0
    for n in range(1, 26):
        term *= -x / n
        contrib = -term / (n - p)
        acc += contrib
        if abs(contrib) < 1e-18 * abs(acc):
            break
    return cut ** (-p) * acc


def _tail_h_exp_integral(u: float, p: float, cut: float) -> float:
    """integral over (cut, inf) of h * exp(-u*h) * h^{-1-p} dh."""
    if u == 0.0:
        return cut ** (1.0 - p) / (1.0 - p) if p < 1.0 else _INF
    return u ** (p - 1.0) * _upper_gamma(1.0 - p, u * cut)


def _tail_h2_exp_integral(u: float, p: float, cut: float) -> float:
    """integral over (cut, inf) of h^2 * exp(-u*h) * h^{-1-p} dh."""
    return u ** (p - 2.0) * _upper_gamma(2.0 - p, u * cut)


# ---------------------------------------------------------------------------
# Levy measure components for the General family
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FiniteAtom:
    """Point mass: nu = mass * delta_h."""

    h: float
    mass: float

    def __post_init__(self):
        if not (self.h > 0.0 and self.mass > 0.0):
            raise ContractError("atom requires h > 0 and mass > 0")

    def total_mass(self) -> float:
        return self.mass

    def small_mean(self) -> float:
        # integral_{(0,1)} h nu(dh)
        return self.mass * self.h if self.h < 1.0 else 0.0

    def tail_mean(self) -> float:
        # integral_{[1,inf)} h nu(dh)
        return self.mass * self.h if self.h >= 1.0 else 0.0

    def heavy_zero_exponent(self):
        return None

    def compensated(self, u: float) -> float:
        comp = u * self.h if self.h < 1.0 else 0.0
        return self.mass * (math.exp(-u * self.h) - 1.0 + comp)

    def plain(self, u: float) -> float:
        return self.mass * (math.exp(-u * self.h) - 1.0)

    def d1_plain(self, u: float) -> float:
        return -self.mass * self.h * math.exp(-u * self.h)

    def d2_plain(self, u: float) -> float:
        return self.mass * self.h**2 * math.exp(-u * self.h)

    def second_moment(self) -> float:
        return self.mass * self.h**2

    def to_config(self) -> dict:
        return {"kind": "finite_atom", "h": self.h, "mass": self.mass}


@dataclass(frozen=True)
class ParetoTail:
    """Density scale * h^{-1-exponent} on (cutoff, inf), exponent in (0, 1]."""

    scale: float
    exponent: float
    cutoff: float

    def __post_init__(self):
        if not (self.scale > 0.0 and self.cutoff > 0.0):
            raise ContractError("pareto tail requires positive scale and cutoff")
        if not 0.0 < self.exponent <= 1.0:
            raise ContractError("pareto tail exponent must lie in (0, 1]")

    def total_mass(self) -> float:
        return self.scale * self.cutoff ** (-self.exponent) / self.exponent

    def small_mean(self) -> float:
        p = self.exponent
        if self.cutoff >= 1.0:
            return 0.0
        if p == 1.0:
            return self.scale * math.log(1.0 / self.cutoff)
        return self.scale * (1.0 - self.cutoff ** (1.0 - p)) / (1.0 - p)

    def tail_mean(self) -> float:
        return _INF  # exponent <= 1 always has infinite mean at infinity

    def heavy_zero_exponent(self):
        p = self.exponent
        if p == 1.0:
            # -Psi ~ scale * u * log(1/u): power 1 with a log factor; the
            # explosion integral is log-divergent either way, so power 1 with
            # the linear-coefficient surrogate is the honest declaration.
            return (1.0, -self.scale)
        return (p, -self.scale * math.gamma(1.0 - p) / p)

    def compensated(self, u: float) -> float:
        return self.plain(u) + u * self.small_mean()

    def plain(self, u: float) -> float:
        return self.scale * _tail_exp_integral(u, self.exponent, self.cutoff)

    def d1_plain(self, u: float) -> float:
        return -self.scale * _tail_h_exp_integral(u, self.exponent, self.cutoff)

    def d2_plain(self, u: float) -> float:
        return self.scale * _tail_h2_exp_integral(u, self.exponent, self.cutoff)

    def second_moment(self) -> float:
        return _INF

    def to_config(self) -> dict:
        return {
            "kind": "pareto_tail",
            "scale": self.scale,
            "exponent": self.exponent,
            "cutoff": self.cutoff,
        }


@dataclass(frozen=True)
class StableDensity:
    """Density scale * h^{-1-index} on (h_min, h_max), index in (0, 1).

    h_min = 0 gives an infinite-activity (but finite-variation) component;
    h_max = inf is the usual unbounded support.
    """

    scale: float
    index: float
    h_min: float = 0.0
    h_max: float = _INF

    def __post_init__(self):
        if not self.scale > 0.0:
            raise ContractError("stable density requires positive scale")
        if not 0.0 < self.index < 1.0:
            raise ContractError("stable density index must lie in (0, 1)")
        if not (0.0 <= self.h_min < self.h_max):
            raise ContractError("stable density cutoffs must satisfy 0 <= h_min < h_max")

    def total_mass(self) -> float:
        p = self.index
        if self.h_min == 0.0:
            return _INF
        hi = 0.0 if math.isinf(self.h_max) else self.h_max ** (-p)
        return self.scale * (self.h_min ** (-p) - hi) / p

    def small_mean(self) -> float:
        p = self.index
        top = min(1.0, self.h_max)
        if self.h_min >= top:
            return 0.0
        return self.scale * (top ** (1.0 - p) - self.h_min ** (1.0 - p)) / (1.0 - p)

    def tail_mean(self) -> float:
        if math.isinf(self.h_max):
            return _INF
        p = self.index
        lo = max(1.0, self.h_min)
        if lo >= self.h_max:
            return 0.0
        return self.scale * (self.h_max ** (1.0 - p) - lo ** (1.0 - p)) / (1.0 - p)

    def heavy_zero_exponent(self):
        if not math.isinf(self.h_max):
            return None
        p = self.index
        return (p, -self.scale * math.gamma(1.0 - p) / p)

    def _plain_from(self, u: float, cut: float) -> float:
        # integral over (cut, inf); cut = 0 uses the exact full-range form
        if cut == 0.0:
            return -self.scale * math.gamma(1.0 - self.index) * u**self.index / self.index
        return self.scale * _tail_exp_integral(u, self.index, cut)

    def plain(self, u: float) -> float:
        val = self._plain_from(u, self.h_min)
        if not math.isinf(self.h_max):
            val -= self.scale * _tail_exp_integral(u, self.index, self.h_max)
        return val

    def compensated(self, u: float) -> float:
        return self.plain(u) + u * self.small_mean()

    def d1_plain(self, u: float) -> float:
        p = self.index
        if self.h_min == 0.0:
            val = -self.scale * math.gamma(1.0 - p) * u ** (p - 1.0)
        else:
            val = -self.scale * _tail_h_exp_integral(u, p, self.h_min)
        if not math.isinf(self.h_max):
            val += self.scale * _tail_h_exp_integral(u, p, self.h_max)
        return val

    def d2_plain(self, u: float) -> float:
        p = self.index
        if self.h_min == 0.0:
            val = self.scale * math.gamma(2.0 - p) * u ** (p - 2.0)
        else:
            val = self.scale * _tail_h2_exp_integral(u, p, self.h_min)
        if not math.isinf(self.h_max):
            val -= self.scale * _tail_h2_exp_integral(u, p, self.h_max)
        return val

    def second_moment(self) -> float:
        if math.isinf(self.h_max):
            return _INF
        p = self.index
        return self.scale * (self.h_max ** (2.0 - p) - self.h_min ** (2.0 - p)) / (2.0 - p)

    def to_config(self) -> dict:
        return {
            "kind": "stable_density",
            "scale": self.scale,
            "index": self.index,
            "h_min": self.h_min,
            "h_max": None if math.isinf(self.h_max) else self.h_max,
        }


NuComponent = Union[FiniteAtom, ParetoTail, StableDensity]


# ---------------------------------------------------------------------------
# Mechanism families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StablePlus:
    """Psi(u) = c * u^{1+alpha}, alpha in (0, 1]; alpha = 1 is the quadratic
    (Feller) mechanism. Critical, infinite variation, finite extinction time."""

    c: float
    alpha: float

    def __post_init__(self):
        if not self.c > 0.0:
            raise ContractError("c must be positive")
        if not 0.0 < self.alpha <= 1.0:
            raise ContractError("alpha must lie in (0, 1]")

    def psi(self, u: float) -> float:
        return self.c * u ** (1.0 + self.alpha)

    def psi_prime(self, u: float) -> float:
        return self.c * (1.0 + self.alpha) * u**self.alpha

    def psi_second(self, u: float) -> float:
        return self.c * (1.0 + self.alpha) * self.alpha * u ** (self.alpha - 1.0)

    def psi_prime_zero(self) -> float:
        return 0.0

    def psi_second_zero(self) -> float:
        return 2.0 * self.c if self.alpha == 1.0 else _INF

    def zero_exponent(self):
        return (1.0 + self.alpha, self.c)

    def inf_exponent(self):
        return (1.0 + self.alpha, self.c)

    @property
    def finite_variation(self) -> bool:
        return False

    @property
    def drift_D(self):
        return None

    def nu_mass(self) -> float:
        return _INF

    def to_config(self) -> dict:
        return {"family": "stable_plus", "c": self.c, "alpha": self.alpha}


@dataclass(frozen=True)
class StableMinus:
    """Psi(u) = -k * u^{1-alpha}, alpha in (0, 1). Finite variation with
    D = 0 and nu(dh) = k(1-alpha)/Gamma(alpha) h^{alpha-2} dh: infinite
    activity, Psi(+inf) = -inf, almost surely explosive."""

    k: float
    alpha: float

    def __post_init__(self):
        if not self.k > 0.0:
            raise ContractError("k must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise ContractError("alpha must lie in (0, 1)")

    def psi(self, u: float) -> float:
        return -self.k * u ** (1.0 - self.alpha)

    def psi_prime(self, u: float) -> float:
        return -self.k * (1.0 - self.alpha) * u ** (-self.alpha)

    def psi_second(self, u: float) -> float:
        return self.k * (1.0 - self.alpha) * self.alpha * u ** (-1.0 - self.alpha)

    def psi_prime_zero(self) -> float:
        return -_INF

    def psi_second_zero(self) -> float:
        return _INF

    def zero_exponent(self):
        return (1.0 - self.alpha, -self.k)

    def inf_exponent(self):
        return (1.0 - self.alpha, -self.k)

    @property
    def finite_variation(self) -> bool:
        return True

    @property
    def drift_D(self) -> float:
        return 0.0

    def nu_mass(self) -> float:
        return _INF

    def density_scale(self) -> float:
        # nu has density density_scale * h^{-1-(1-alpha)}
        return self.k * (1.0 - self.alpha) / math.gamma(self.alpha)

    def to_config(self) -> dict:
        return {"family": "stable_minus", "k": self.k, "alpha": self.alpha}


@dataclass(frozen=True)
class LinearStableMinus:
    """Psi(u) = -c*u - k*u^{1-alpha}. Finite variation with D = -c < 0,
    same jump measure as StableMinus; almost surely explosive."""

    c: float
    k: float
    alpha: float

    def __post_init__(self):
        if not (self.c > 0.0 and self.k > 0.0):
            raise ContractError("c and k must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise ContractError("alpha must lie in (0, 1)")

    def psi(self, u: float) -> float:
        return -self.c * u - self.k * u ** (1.0 - self.alpha)

    def psi_prime(self, u: float) -> float:
        return -self.c - self.k * (1.0 - self.alpha) * u ** (-self.alpha)

    def psi_second(self, u: float) -> float:
        return self.k * (1.0 - self.alpha) * self.alpha * u ** (-1.0 - self.alpha)

    def psi_prime_zero(self) -> float:
        return -_INF

    def psi_second_zero(self) -> float:
        return _INF

    def zero_exponent(self):
        return (1.0 - self.alpha, -self.k)

    def inf_exponent(self):
        return (1.0, -self.c)

    @property
    def finite_variation(self) -> bool:
        return True

    @property
    def drift_D(self) -> float:
        return -self.c

    def nu_mass(self) -> float:
        return _INF

    def density_scale(self) -> float:
        return self.k * (1.0 - self.alpha) / math.gamma(self.alpha)

    def to_config(self) -> dict:
        return {
            "family": "linear_stable_minus",
            "c": self.c,
            "k": self.k,
            "alpha": self.alpha,
        }


@dataclass(frozen=True)
class TruncatedPareto:
    """D = 0 and nu(dh) = rho * alpha * h0^alpha * h^{-alpha-1} on (h0, inf),
    alpha in (0, 1]: a finite-activity pure-jump mechanism with total jump
    rate rho per unit mass and Psi(+inf) = -rho.

    Psi(u) = rho * (alpha (h0 u)^alpha Gamma(-alpha, u h0) - 1) for u > 0.
    """

    rho: float
    alpha: float
    h0: float

    def __post_init__(self):
        if not (self.rho > 0.0 and self.h0 > 0.0):
            raise ContractError("rho and h0 must be positive")
        if not 0.0 < self.alpha <= 1.0:
            raise ContractError("alpha must lie in (0, 1]")

    def _scale(self) -> float:
        return self.rho * self.alpha * self.h0**self.alpha

    def psi(self, u: float) -> float:
        if u == 0.0:
            return 0.0
        return self._scale() * _tail_exp_integral(u, self.alpha, self.h0)

    def psi_prime(self, u: float) -> float:
        return -self._scale() * _tail_h_exp_integral(u, self.alpha, self.h0)

    def psi_second(self, u: float) -> float:
        return self._scale() * _tail_h2_exp_integral(u, self.alpha, self.h0)

    def psi_prime_zero(self) -> float:
        return -_INF

    def psi_second_zero(self) -> float:
        return _INF

    def zero_exponent(self):
        if self.alpha == 1.0:
            # -Psi ~ rho*h0*u*log(1/u): linear power, explosion integral diverges
            return (1.0, -self.rho * self.h0)
        g = -self._scale() * math.gamma(1.0 - self.alpha) / self.alpha
        return (self.alpha, g)

    def inf_exponent(self):
        return (0.0, -self.rho)

    @property
    def finite_variation(self) -> bool:
        return True

    @property
    def drift_D(self) -> float:
        return 0.0

    def nu_mass(self) -> float:
        return self.rho

    def to_config(self) -> dict:
        return {
            "family": "truncated_pareto",
            "rho": self.rho,
            "alpha": self.alpha,
            "h0": self.h0,
        }


@dataclass(frozen=True)
class LinearDrift:
    """Psi(u) = D * u: deterministic exponential flow, no jumps."""

    D: float

    def psi(self, u: float) -> float:
        return self.D * u

    def psi_prime(self, u: float) -> float:
        return self.D

    def psi_second(self, u: float) -> float:
        return 0.0

    def psi_prime_zero(self) -> float:
        return self.D

    def psi_second_zero(self) -> float:
        return 0.0

    def zero_exponent(self):
        return (1.0, self.D)

    def inf_exponent(self):
        return (1.0, self.D)

    @property
    def finite_variation(self) -> bool:
        return True

    @property
    def drift_D(self) -> float:
        return self.D

    def nu_mass(self) -> float:
        return 0.0

    def to_config(self) -> dict:
        return {"family": "linear_drift", "D": self.D}


@dataclass(frozen=True)
class General:
    """Psi(u) = gamma*u + sigma2/2 u^2 + sum of component integrals.

    Components must each declare their integrability structure; that is what
    makes the classification analytic. All supported components have finite
    variation, so the mechanism has finite variation iff sigma2 = 0.
    """

    gamma: float = 0.0
    sigma2: float = 0.0
    nu: tuple = ()

    def __post_init__(self):
        if self.sigma2 < 0.0:
            raise ContractError("sigma2 must be nonnegative")
        object.__setattr__(self, "nu", tuple(self.nu))
        for comp in self.nu:
            if not isinstance(comp, (FiniteAtom, ParetoTail, StableDensity)):
                raise UnsupportedClassificationError(
                    f"unsupported Levy-measure component {type(comp).__name__}"
                )

    def psi(self, u: float) -> float:
        val = self.gamma * u + 0.5 * self.sigma2 * u * u
        for comp in self.nu:
            val += comp.compensated(u)
        return val

    def psi_prime(self, u: float) -> float:
        val = self.gamma + self.sigma2 * u
        for comp in self.nu:
            val += comp.d1_plain(u) + comp.small_mean()
        return val

    def psi_second(self, u: float) -> float:
        val = self.sigma2
        for comp in self.nu:
            val += comp.d2_plain(u)
        return val

    def psi_prime_zero(self) -> float:
        tail = 0.0
        for comp in self.nu:
            tm = comp.tail_mean()
            if math.isinf(tm):
                return -_INF
            tail += tm
        return self.gamma - tail

    def psi_second_zero(self) -> float:
        val = self.sigma2
        for comp in self.nu:
            m2 = comp.second_moment()
            if math.isinf(m2):
                return _INF
            val += m2
        return val

    def zero_exponent(self):
        d1 = self.psi_prime_zero()
        if math.isinf(d1):
            heavy = [c.heavy_zero_exponent() for c in self.nu]
            heavy = [he for he in heavy if he is not None]
            if not heavy:
                raise UnsupportedClassificationError(
                    "components do not declare the heavy-tail exponent"
                )
            p = min(he[0] for he in heavy)
            const = sum(he[1] for he in heavy if he[0] == p)
            return (p, const)
        if d1 != 0.0:
            return (1.0, d1)
        d2 = self.psi_second_zero()
        if math.isinf(d2):
            raise UnsupportedClassificationError(
                "critical mechanism with infinite curvature lacks a declared exponent"
            )
        return (2.0, 0.5 * d2)

    def inf_exponent(self):
        if self.sigma2 > 0.0:
            return (2.0, 0.5 * self.sigma2)
        D = self.drift_D
        if D != 0.0:
            return (1.0, D)
        mass = self.nu_mass()
        if math.isinf(mass):
            # sublinear decay set by the infinite-activity component
            cands = [
                (c.index, -c.scale * math.gamma(1.0 - c.index) / c.index)
                for c in self.nu
                if isinstance(c, StableDensity) and c.h_min == 0.0
            ]
            p = max(cc[0] for cc in cands)
            return (p, sum(cc[1] for cc in cands if cc[0] == p))
        return (0.0, -mass)

    @property
    def finite_variation(self) -> bool:
        return self.sigma2 == 0.0

    @property
    def drift_D(self):
        if self.sigma2 != 0.0:
            return None
        return self.gamma + sum(c.small_mean() for c in self.nu)

    def nu_mass(self) -> float:
        return sum(c.total_mass() for c in self.nu)

    def to_config(self) -> dict:
        return {
            "family": "general",
            "gamma": self.gamma,
            "sigma2": self.sigma2,
            "nu": [c.to_config() for c in self.nu],
        }


BranchingMechanism = Union[
    StablePlus, StableMinus, LinearStableMinus, TruncatedPareto, LinearDrift, General
]

_MECHANISM_TYPES = (
    StablePlus,
    StableMinus,
    LinearStableMinus,
    TruncatedPareto,
    LinearDrift,
    General,
)


# ---------------------------------------------------------------------------
# Evaluation entry points
# ---------------------------------------------------------------------------


def psi_eval(mech: BranchingMechanism, u: float) -> float:
    """Evaluate Psi(u) for u >= 0 via the family's closed form."""
    if not u >= 0.0:
        raise ContractError(f"u must be nonnegative, got {u}")
    if u == 0.0:
        return 0.0
    return mech.psi(float(u))


def psi_derivatives(mech: BranchingMechanism, u: float) -> tuple[float, float]:
    """Return (Psi'(u), Psi''(u)) for u > 0.

    The limits at 0+ are available as extended reals through classify().
    """
    if not u > 0.0:
        raise ContractError(f"u must be positive, got {u}")
    u = float(u)
    return mech.psi_prime(u), mech.psi_second(u)


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Classification:
    """Analytic summary of a mechanism's long-run behavior."""

    criticality: str  # "subcritical" | "critical" | "supercritical"
    q: float  # largest root of Psi (0, a positive real, or inf)
    finite_variation: bool
    D: float | None  # defined only when finite_variation
    psi_infinity: float  # extended real
    extinction_time_finite: bool
    explosion_time_finite: bool
    almost_sure_explosion: bool
    psi_prime_zero: float  # extended real
    psi_second_zero: float  # extended real


def _find_root_q(mech: BranchingMechanism) -> float:
    """Largest root of Psi for a supercritical mechanism (Psi < 0 near 0)."""
    p_inf, c_inf = mech.inf_exponent()
    if c_inf < 0.0 or (c_inf == 0.0 and p_inf >= 0.0):
        # Psi stays nonpositive at infinity; confirm no sign change up to 1e12
        u = 1.0
        while u <= 1e12:
            if psi_eval(mech, u) > 0.0:
                break
            u *= 10.0
        else:
            return _INF
    # sign change exists: bracket geometrically from u = 1, then refine
    from scipy.optimize import brentq

    hi = 1.0
    for _ in range(420):
        if psi_eval(mech, hi) > 0.0:
            break
        hi *= 2.0
    else:
        return _INF
    lo = hi / 2.0
    while psi_eval(mech, lo) >= 0.0:
        lo /= 2.0
        if lo < 1e-300:
            return 0.0
    return float(brentq(lambda v: psi_eval(mech, v), lo, hi, rtol=1e-12))


def classify(mech: BranchingMechanism) -> Classification:
    """Populate the full analytic classification of a mechanism.

    Integrability of the lifetime integrals is read off the declared
    asymptotic exponents: the extinction-side integral converges iff Psi grows
    superlinearly at +inf, the explosion-side integral converges iff -Psi is
    sublinear at 0+.
    """
    if not isinstance(mech, _MECHANISM_TYPES):
        raise UnsupportedClassificationError(f"unknown mechanism type {type(mech)!r}")

    d1_zero = mech.psi_prime_zero()
    if d1_zero > 0.0:
        criticality = "subcritical"
    elif d1_zero == 0.0:
        criticality = "critical"
    else:
        criticality = "supercritical"

    q = 0.0 if d1_zero >= 0.0 else _find_root_q(mech)

    fv = mech.finite_variation
    D = mech.drift_D if fv else None

    # Psi(+inf) from the infinity-side exponent
    p_inf, c_inf = mech.inf_exponent()
    if p_inf == 0.0:
        psi_infinity = c_inf
    elif c_inf > 0.0:
        psi_infinity = _INF
    elif c_inf < 0.0:
        psi_infinity = -_INF
    else:
        psi_infinity = 0.0  # identically-zero drift

    # extinction side: integral^inf du/Psi finite iff Psi ~ c u^p, c>0, p>1
    extinction = c_inf > 0.0 and p_inf > 1.0

    # explosion side: integral_{0+} du/(-Psi) finite iff -Psi ~ |c| u^p, p<1
    p0, c0 = mech.zero_exponent()
    explosion = c0 < 0.0 and p0 < 1.0

    as_explosion = explosion and math.isinf(q)
    if as_explosion and not (fv and D is not None and D <= 0.0):
        raise UnsupportedClassificationError(
            "inconsistent declaration: almost sure explosion requires finite "
            "variation with nonpositive drift"
        )

    return Classification(
        criticality=criticality,
        q=q,
        finite_variation=fv,
        D=D,
        psi_infinity=psi_infinity,
        extinction_time_finite=extinction,
        explosion_time_finite=explosion,
        almost_sure_explosion=as_explosion,
        psi_prime_zero=d1_zero,
        psi_second_zero=mech.psi_second_zero(),
    )


# ---------------------------------------------------------------------------
# Jump decomposition for event-driven simulation
# ---------------------------------------------------------------------------

JUMP_ATOM = 0  # fixed jump size par_a
JUMP_PARETO = 1  # h = par_a * U^{-par_b}, i.e. Pareto(1/par_b) above par_a


@dataclass(frozen=True)
class JumpDecomposition:
    """Finite-activity representation Psi(u) = D u + sum_i (plain integral).

    Jump sizes are drawn from the mixture of `parts`; each part is
    (mass, kind, par_a, par_b). For infinite-activity measures the jumps below
    `eps` are dropped and `drift_defect` records the neglected
    integral_0^eps h nu(dh) per unit population mass.
    """

    D: float
    parts: tuple  # of (mass, kind, par_a, par_b)
    eps: float | None
    drift_defect: float

    @property
    def total_rate(self) -> float:
        return sum(p[0] for p in self.parts)


def jump_decomposition(mech: BranchingMechanism, eps: float | None = None) -> JumpDecomposition:
    """Event-simulation decomposition of a finite-variation mechanism.

    Raises a contract error for infinite-variation mechanisms (the quadratic
    case has its own exact transition sampler) and demands a positive `eps`
    whenever nu has infinite total mass.
    """
    if not mech.finite_variation:
        raise ContractError(
            "event simulation requires a finite-variation mechanism; "
            "use the exact quadratic-mechanism transition sampler instead"
        )
    if eps is not None and not eps > 0.0:
        raise ContractError("small-jump cutoff must be positive")

    def need_eps():
        if eps is None:
            raise ContractError(
                "mechanism has infinite jump activity: a small-jump cutoff is required"
            )

    if isinstance(mech, LinearDrift):
        return JumpDecomposition(D=mech.D, parts=(), eps=None, drift_defect=0.0)
    if isinstance(mech, TruncatedPareto):
        part = (mech.rho, JUMP_PARETO, mech.h0, 1.0 / mech.alpha)
        return JumpDecomposition(D=0.0, parts=(part,), eps=None, drift_defect=0.0)
    if isinstance(mech, (StableMinus, LinearStableMinus)):
        need_eps()
        p = 1.0 - mech.alpha
        s = mech.density_scale()
        mass = s * eps ** (-p) / p
        defect = s * eps**mech.alpha / mech.alpha
        part = (mass, JUMP_PARETO, eps, 1.0 / p)
        return JumpDecomposition(D=mech.drift_D, parts=(part,), eps=eps, drift_defect=defect)
    if isinstance(mech, General):
        parts = []
        defect = 0.0
        used_eps = None
        for comp in mech.nu:
            if isinstance(comp, FiniteAtom):
                parts.append((comp.mass, JUMP_ATOM, comp.h, 0.0))
            elif isinstance(comp, ParetoTail):
                parts.append((comp.total_mass(), JUMP_PARETO, comp.cutoff, 1.0 / comp.exponent))
            else:  # StableDensity
                if not math.isinf(comp.h_max):
                    raise ContractError("bounded stable-density components are not samplable")
                if comp.h_min > 0.0:
                    parts.append((comp.total_mass(), JUMP_PARETO, comp.h_min, 1.0 / comp.index))
                else:
                    need_eps()
                    used_eps = eps
                    p = comp.index
                    mass = comp.scale * eps ** (-p) / p
                    defect += comp.scale * eps ** (1.0 - p) / (1.0 - p)
                    parts.append((mass, JUMP_PARETO, eps, 1.0 / p))
        return JumpDecomposition(
            D=mech.drift_D, parts=tuple(parts), eps=used_eps, drift_defect=defect
        )
    raise ContractError(f"no jump decomposition for {type(mech).__name__}")


def truncated_mechanism(mech: BranchingMechanism, eps: float) -> General:
    """The mechanism actually simulated when jumps below eps are dropped.

    Only defined for the stable-jump families; the result is an exactly
    evaluable General mechanism, so truncation bias can be measured against
    its flow rather than guessed.
    """
    if not isinstance(mech, (StableMinus, LinearStableMinus)):
        raise ContractError("truncated mechanism is defined for the stable-jump families")
    comp = StableDensity(scale=mech.density_scale(), index=1.0 - mech.alpha, h_min=eps)
    gamma = mech.drift_D - comp.small_mean()
    return General(gamma=gamma, sigma2=0.0, nu=(comp,))


# ---------------------------------------------------------------------------
# Text-configuration round trip
# ---------------------------------------------------------------------------


def _component_from_config(cfg: dict) -> NuComponent:
    kind = cfg.get("kind")
    if kind == "finite_atom":
        return FiniteAtom(h=float(cfg["h"]), mass=float(cfg["mass"]))
    if kind == "pareto_tail":
        return ParetoTail(
            scale=float(cfg["scale"]),
            exponent=float(cfg["exponent"]),
            cutoff=float(cfg["cutoff"]),
        )
    if kind == "stable_density":
        h_max = cfg.get("h_max")
        return StableDensity(
            scale=float(cfg["scale"]),
            index=float(cfg["index"]),
            h_min=float(cfg.get("h_min", 0.0)),
            h_max=_INF if h_max is None else float(h_max),
        )
    raise ContractError(f"unknown Levy-measure component kind {kind!r}")


def mechanism_from_config(cfg: dict) -> BranchingMechanism:
    """Build a mechanism from its key-value description. Round-trips exactly."""
    if not isinstance(cfg, dict) or "family" not in cfg:
        raise ContractError("mechanism config must be a mapping with a 'family' key")
    family = cfg["family"]
    try:
        if family == "stable_plus":
            return StablePlus(c=float(cfg["c"]), alpha=float(cfg["alpha"]))
        if family == "stable_minus":
            return StableMinus(k=float(cfg["k"]), alpha=float(cfg["alpha"]))
        if family == "linear_stable_minus":
            return LinearStableMinus(
                c=float(cfg["c"]), k=float(cfg["k"]), alpha=float(cfg["alpha"])
            )
        if family == "truncated_pareto":
            return TruncatedPareto(
                rho=float(cfg["rho"]), alpha=float(cfg["alpha"]), h0=float(cfg["h0"])
            )
        if family == "linear_drift":
            return LinearDrift(D=float(cfg["D"]))
        if family == "general":
            return General(
                gamma=float(cfg.get("gamma", 0.0)),
                sigma2=float(cfg.get("sigma2", 0.0)),
                nu=tuple(_component_from_config(c) for c in cfg.get("nu", ())),
            )
    except KeyError as exc:
        raise ContractError(f"mechanism config for {family!r} is missing field {exc}") from None
    raise ContractError(f"unknown mechanism family {family!r}")


def mechanism_to_config(mech: BranchingMechanism) -> dict:
    return mech.to_config()


def load_mechanism(path: str) -> BranchingMechanism:
    """Read a mechanism from a JSON text file."""
    with open(path, "r", encoding="utf-8") as fh:
        return mechanism_from_config(json.load(fh))
