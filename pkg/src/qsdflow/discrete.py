"""Discrete-state branching: generating-function flow and QSD spectrum.

A DSBP is a continuous-time Galton-Watson process: individuals live
exponential(c) lifetimes and are replaced by offspring drawn from a pmf xi
with generating function phi. The semigroup acts on generating functions,
F(t, r) = E_1[r^{Z_t}; no explosion], and solves dF/dt = c (phi(F) - F).

With xi(0) = 0 and a heavy offspring tail making integral_{1-} dx /
(c (x - phi(x))) finite, explosion is almost sure and the exponent

    Phi(r) = integral_r^1 dx / (c (x - phi(x)))

is the discrete analogue of the explosion-side exponent: Phi(F(t, 1-)) = t.
The quasi-stationary distributions conditioned on non-explosion exist
exactly at the quantized decay rates beta = n beta0, beta0 = c (1 - xi(1)),
n = 1, 2, ...; their pmf coefficients come out of a linear recursion whose
degenerate pivot sits exactly at m = beta / beta0. Running the recursion at
a non-quantized rate forces the zero series, which is how the quantization
is rejected rather than assumed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import integrate as _si
from scipy.optimize import brentq

from .errors import ContractError, NoQsdError, NumericError

__all__ = [
    "SibuyaOffspring",
    "FinitePmfOffspring",
    "Offspring",
    "DiscreteBranching",
    "DsbpClassification",
    "DiscreteQsd",
    "dsbp_classify",
    "dsbp_phi",
    "dsbp_F",
    "dsbp_qsd_pmf",
    "offspring_sampling_table",
]

# pivot detection: |beta - m beta0| below this multiple of beta0 is treated
# as the degenerate index carrying the free constant
_PIVOT_RTOL = 1e-9

_SAMPLING_TABLE_SIZE = 32768


@dataclass(frozen=True)
class SibuyaOffspring:
    """Offspring pmf with generating function phi(x) = 1 - (1 - x)^alpha.

    Heavy-tailed with infinite mean for alpha in (0, 1); xi(1) = alpha and
    xi(0) = 0, so a DSBP driven by it explodes almost surely.
    """

    alpha: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ContractError(f"Sibuya exponent must lie in (0, 1), got {self.alpha}")

    def pgf(self, x: float) -> float:
        if not 0.0 <= x <= 1.0:
            raise ContractError(f"pgf argument must lie in [0, 1], got {x}")
        return 1.0 - (1.0 - x) ** self.alpha

    def coefficients(self, K: int) -> np.ndarray:
        """xi(1..K): xi(1) = alpha, xi(j+1) = xi(j) (j - alpha) / (j + 1)."""
        out = np.empty(K)
        p = self.alpha
        for j in range(1, K + 1):
            out[j - 1] = p
            p *= (j - self.alpha) / (j + 1)
        return out

    def xi0(self) -> float:
        return 0.0

    def xi1(self) -> float:
        return self.alpha

    def mean_finite(self) -> bool:
        return False

    def tail_exponent(self) -> float:
        # x - phi(x) ~ (1 - x)^alpha as x -> 1-
        return self.alpha

    def to_config(self) -> dict:
        return {"kind": "sibuya", "alpha": self.alpha}


@dataclass(frozen=True)
class FinitePmfOffspring:
    """Offspring pmf with finite support, given as (xi(0), xi(1), ..., xi(J))."""

    probs: tuple

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "probs", probs)
        if len(probs) == 0:
            raise ContractError("offspring pmf must be nonempty")
        if any(p < 0.0 for p in probs):
            raise ContractError("offspring probabilities must be nonnegative")
        if abs(sum(probs) - 1.0) > 1e-12:
            raise ContractError(f"offspring pmf must sum to 1, got {sum(probs)!r}")

    def pgf(self, x: float) -> float:
        if not 0.0 <= x <= 1.0:
            raise ContractError(f"pgf argument must lie in [0, 1], got {x}")
        return float(sum(p * x**j for j, p in enumerate(self.probs)))

    def coefficients(self, K: int) -> np.ndarray:
        out = np.zeros(K)
        for j, p in enumerate(self.probs):
            if 1 <= j <= K:
                out[j - 1] = p
        return out

    def xi0(self) -> float:
        return self.probs[0]

    def xi1(self) -> float:
        return self.probs[1] if len(self.probs) > 1 else 0.0

    def mean_finite(self) -> bool:
        return True

    def tail_exponent(self) -> float:
        return 1.0

    def to_config(self) -> dict:
        return {"kind": "finite_pmf", "probs": list(self.probs)}


Offspring = Union[SibuyaOffspring, FinitePmfOffspring]


@dataclass(frozen=True)
class DiscreteBranching:
    """A DSBP: lifetime rate c and offspring law xi."""

    c: float
    xi: Offspring

    def __post_init__(self):
        if not self.c > 0.0:
            raise ContractError(f"lifetime rate c must be positive, got {self.c}")
        if not isinstance(self.xi, (SibuyaOffspring, FinitePmfOffspring)):
            raise ContractError(f"unsupported offspring law {type(self.xi).__name__}")

    def phi(self, x: float) -> float:
        return self.xi.pgf(x)

    def beta0(self) -> float:
        return self.c * (1.0 - self.xi.xi1())

    def to_config(self) -> dict:
        return {"family": "dsbp", "c": self.c, "xi": self.xi.to_config()}


@dataclass(frozen=True)
class DsbpClassification:
    explosive_as: bool
    beta0: float


@dataclass(frozen=True)
class DiscreteQsd:
    """QSD pmf over {1, ..., K} at decay rate n beta0, plus truncation residual."""

    n: int
    pmf: np.ndarray
    truncation_residual: float

    def __post_init__(self):
        pmf = np.asarray(self.pmf, dtype=float)
        if pmf.ndim != 1 or pmf.size == 0:
            raise ContractError("pmf must be a nonempty vector")
        if float(pmf.min()) < -1e-12:
            raise ContractError(f"pmf entries must be nonnegative, min = {pmf.min()}")
        pmf = np.maximum(pmf, 0.0)
        pmf.setflags(write=False)
        object.__setattr__(self, "pmf", pmf)
        if abs(float(pmf.sum()) + self.truncation_residual - 1.0) > 1e-10:
            raise ContractError("pmf mass plus truncation residual must equal 1")


def dsbp_classify(d: DiscreteBranching) -> DsbpClassification:
    """Almost-sure explosion and the base decay rate beta0 = c (1 - xi(1)).

    Explosion requires xi(0) = 0 (no downward absorption competing) and an
    integrable singularity of 1 / (x - phi(x)) at 1-, i.e. a tail exponent
    strictly below 1. Finite-mean offspring make phi(x) - x vanish linearly,
    a log-divergent endpoint, so those never explode.
    """
    explosive = (
        d.xi.xi0() == 0.0 and not d.xi.mean_finite() and d.xi.tail_exponent() < 1.0
    )
    return DsbpClassification(explosive_as=explosive, beta0=d.beta0())


def _phi_closed_sibuya(d: DiscreteBranching, r: float) -> float:
    a = d.xi.alpha
    y = (1.0 - r) ** (1.0 - a)
    return -math.log1p(-y) / (d.c * (1.0 - a))


def _phi_quadrature(d: DiscreteBranching, r: float) -> float:
    # integral_r^1 dx / (c (x - phi(x))); with y = 1 - x the integrand is
    # singular like y^{-alpha}, removed exactly by y = s^{1/(1-alpha)}
    a = d.xi.tail_exponent()
    m = 1.0 / (1.0 - a)

    def integrand(s: float) -> float:
        y = s**m
        x = 1.0 - y
        return m * s ** (m - 1.0) / (d.c * (x - d.phi(x)))

    val, _ = _si.quad(integrand, 0.0, (1.0 - r) ** (1.0 / m), epsabs=1e-14, epsrel=1e-12, limit=300)
    if not math.isfinite(val):
        raise NumericError(f"exponent quadrature returned {val} at r={r}")
    return val


def dsbp_phi(d: DiscreteBranching, r: float) -> float:
    """Explosion exponent Phi(r) = integral_r^1 dx / (c (x - phi(x))).

    Decreasing from +inf at 0+ to 0 at 1; the inverse map of t -> F(t, 1-).
    """
    if not dsbp_classify(d).explosive_as:
        raise ContractError("the explosion exponent requires an almost surely explosive DSBP")
    if not 0.0 < r <= 1.0:
        raise ContractError(f"r must lie in (0, 1], got {r}")
    r = float(r)
    if r == 1.0:
        return 0.0
    if isinstance(d.xi, SibuyaOffspring):
        return _phi_closed_sibuya(d, r)
    return _phi_quadrature(d, r)


def dsbp_F(d: DiscreteBranching, t: float, r: float) -> float:
    """Generating-function flow F(t, r); r = 1 means the limit from below.

    Solves Phi(F) = t + Phi(r); F(t, 1-)^n is the probability of no
    explosion by time t from n ancestors.
    """
    if not dsbp_classify(d).explosive_as:
        raise ContractError("the flow solver requires an almost surely explosive DSBP")
    if not t >= 0.0:
        raise ContractError(f"t must be nonnegative, got {t}")
    if not 0.0 < r <= 1.0:
        raise ContractError(f"r must lie in (0, 1], got {r}")
    t, r = float(t), float(r)
    if t == 0.0:
        return r
    if isinstance(d.xi, SibuyaOffspring):
        a = d.xi.alpha
        # 1 - (1-r)^{1-a}, exact also in the r -> 1- limit
        start = 1.0 if r == 1.0 else -math.expm1((1.0 - a) * math.log1p(-r))
        decayed = math.exp(-d.c * (1.0 - a) * t) * start
        return 1.0 - (1.0 - decayed) ** (1.0 / (1.0 - a))
    target = t + dsbp_phi(d, r)
    lo, hi = r, r
    f_lo = dsbp_phi(d, lo)
    for _ in range(400):
        if f_lo >= target:
            break
        lo /= 2.0
        f_lo = dsbp_phi(d, lo)
    else:
        raise NumericError(f"flow bracket failed at t={t}, r={r}")
    return float(brentq(lambda s: dsbp_phi(d, s) - target, lo, hi, xtol=1e-300, rtol=9e-16))


def dsbp_qsd_pmf(
    d: DiscreteBranching, n: int | None = None, K: int = 256, beta: float | None = None
) -> DiscreteQsd:
    """QSD pmf at decay rate beta = n beta0 by coefficient recursion.

    The generating function g(r) = exp(-beta Phi(r)) satisfies
    c (phi(r) - r) g'(r) = -beta g(r); comparing r^m coefficients,

        g_m (beta - m beta0) = -c sum_{j=2}^{m} xi_j (m - j + 1) g_{m-j+1}.

    For beta = n beta0 the index m = n is degenerate: g_m = 0 is forced
    below it, g_n is free (the overall scale), and everything above is
    determined. For any other beta no index is degenerate and the recursion
    grinds out the zero series: no QSD exists at that rate, which is
    reported as such. The scale is fixed against the exact transform at
    r = 1/2, where the truncated tail is geometrically negligible, so the
    returned entries are the true coefficients rather than the truncated
    series renormalized; the mass missing from {1..K} is reported as the
    truncation residual.
    """
    cls = dsbp_classify(d)
    if not cls.explosive_as:
        raise ContractError("QSDs conditioned on non-explosion require an almost surely explosive DSBP")
    if (n is None) == (beta is None):
        raise ContractError("exactly one of n and beta must be given")
    beta0 = cls.beta0
    if beta is None:
        if not (isinstance(n, (int, np.integer)) and n >= 1):
            raise ContractError(f"n must be a positive integer, got {n}")
        beta = n * beta0
    if not beta > 0.0:
        raise ContractError(f"decay rate beta must be positive, got {beta}")
    if not (isinstance(K, (int, np.integer)) and K >= 1 and K >= beta / beta0 - _PIVOT_RTOL):
        raise ContractError(f"truncation order K={K} must be an integer at least beta/beta0")

    xi = d.xi.coefficients(int(K))
    g = np.zeros(int(K) + 1)  # g[m] is the coefficient of r^m, g[0] unused
    weighted = np.zeros(int(K) + 1)  # (m) g_m, the convolution input
    pivot = None
    for m in range(1, int(K) + 1):
        rhs = -d.c * float(np.dot(xi[1:m], weighted[m - 1 : 0 : -1]))
        A = beta - m * beta0
        if abs(A) <= _PIVOT_RTOL * beta0:
            if pivot is not None:
                raise NumericError(f"second degenerate index at m={m}")
            pivot = m
            g[m] = 1.0
        else:
            g[m] = rhs / A
        weighted[m] = m * g[m]

    if pivot is None:
        raise NoQsdError(
            f"no QSD exists at decay rate beta={beta}: the coefficient recursion "
            f"degenerates only at the quantized rates n*beta0, beta0={beta0}"
        )

    # anchor the scale at r* = 1/2: exp(-beta Phi(1/2)) = sum g_m 2^{-m} + O(2^{-K})
    r_star = 0.5
    series = float(np.polyval(g[::-1], r_star))
    if series <= 0.0:
        raise NumericError("coefficient series is not positive at the anchor point")
    theta = math.exp(-beta * dsbp_phi(d, r_star)) / series
    pmf = theta * g[1:]
    residual = 1.0 - float(pmf.sum())
    return DiscreteQsd(n=pivot, pmf=pmf, truncation_residual=residual)


def offspring_sampling_table(xi: Offspring, size: int = _SAMPLING_TABLE_SIZE):
    """(cdf, tail_coef, tail_inv_alpha) for inverse-CDF offspring sampling.

    cdf[j] = P(offspring <= j) for j = 0..size-1; a uniform draw u is
    inverted to the smallest j with u <= cdf[j]. Beyond the table the
    Sibuya survival asymptotic P(X > k) ~ k^{-alpha} / Gamma(1 - alpha)
    inverts analytically to k = ceil(((1-u) tail_coef)^{-tail_inv_alpha}),
    clamped to >= size; the relative bias out there is O(1/k). Finite pmfs
    close the table exactly, so their fallback is unreachable.
    """
    cdf = np.empty(size)
    cdf[0] = xi.xi0()
    cdf[1:] = xi.xi0() + np.cumsum(xi.coefficients(size - 1))
    if isinstance(xi, SibuyaOffspring):
        return cdf, math.gamma(1.0 - xi.alpha), 1.0 / xi.alpha
    cdf[len(xi.probs) - 1 :] = 1.0
    return cdf, 0.0, 0.0


def discrete_from_config(cfg: dict) -> DiscreteBranching:
    """Build a discrete process from its key-value description."""
    if not isinstance(cfg, dict) or cfg.get("family") != "dsbp":
        raise ContractError("discrete config must be a mapping with family 'dsbp'")
    xi_cfg = cfg.get("xi")
    if not isinstance(xi_cfg, dict):
        raise ContractError("discrete config needs an 'xi' offspring mapping")
    kind = xi_cfg.get("kind")
    if kind == "sibuya":
        xi = SibuyaOffspring(alpha=float(xi_cfg["alpha"]))
    elif kind == "finite_pmf":
        xi = FinitePmfOffspring(probs=tuple(xi_cfg["probs"]))
    else:
        raise ContractError(f"unknown offspring kind {kind!r}")
    return DiscreteBranching(c=float(cfg["c"]), xi=xi)
