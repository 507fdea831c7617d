"""Path simulation and statistical estimators for branching processes.

Continuous-state paths follow the exact event-driven scheme for
finite-activity mechanisms (deterministic linear decay between jumps,
state-dependent exponential event clocks); infinite-activity stable tails
are simulated above a small-jump cutoff with the neglected drift reported
as a bias bound. Discrete-state paths replace exponentially distributed
individuals by offspring draws. The quadratic mechanism has an exact
transition sampler instead of an event loop.

Per-path random streams are derived from (seed, path index) by a
counter-based construction, so results are bit-identical for any thread
count or path partition.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .discrete import DiscreteBranching, offspring_sampling_table
from .errors import ContractError, StatisticalPowerError
from .mechanisms import (
    BranchingMechanism,
    jump_decomposition,
    mechanism_to_config,
)

try:  # compiled event loops, pure-Python fallback
    from . import _kernels as _kernels
except ImportError:  # pragma: no cover - exercised only without the extension
    from . import _kernels_py as _kernels

FLAG_SURVIVED = _kernels.FLAG_SURVIVED
FLAG_EXPLODED = _kernels.FLAG_EXPLODED
FLAG_INCONCLUSIVE = _kernels.FLAG_INCONCLUSIVE
FLAG_EXTINCT = _kernels.FLAG_EXTINCT

_MASK64 = (1 << 64) - 1
_CHUNK = 4096  # paths per worker task


def kernel_backend() -> str:
    """Name of the active event-loop implementation: cython or python."""
    return _kernels.kernel_backend()


@dataclass(frozen=True)
class SimConfig:
    """Knobs shared by every path simulation."""

    seed: int
    n_paths: int
    horizon: float
    explosion_threshold: float = 1e12
    small_jump_cutoff: float = 1e-4
    max_events: int = 10_000_000
    threads: int = 1

    def __post_init__(self):
        if self.n_paths < 1:
            raise ContractError("n_paths must be at least 1")
        if not self.horizon > 0.0:
            raise ContractError("horizon must be positive")
        if not self.explosion_threshold >= 1e6:
            raise ContractError("explosion threshold must be at least 1e6")
        if not self.small_jump_cutoff > 0.0:
            raise ContractError("small-jump cutoff must be positive")
        if self.max_events < 1:
            raise ContractError("max_events must be at least 1")
        if self.threads < 1:
            raise ContractError("threads must be at least 1")

    def to_config(self) -> dict:
        return {
            "seed": int(self.seed) & _MASK64,
            "n_paths": int(self.n_paths),
            "horizon": self.horizon,
            "explosion_threshold": self.explosion_threshold,
            "small_jump_cutoff": self.small_jump_cutoff,
            "max_events": int(self.max_events),
        }


def _config_hash(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class EstimateWithCI:
    """Sample mean with a central-limit standard error."""

    point: float
    standard_error: float
    n_effective: int

    def interval(self, z: float = 3.0) -> tuple[float, float]:
        return (self.point - z * self.standard_error, self.point + z * self.standard_error)

    def covers(self, target: float, z: float = 3.0) -> bool:
        return abs(self.point - target) <= z * self.standard_error


@dataclass(frozen=True)
class TrajectoryEnsemble:
    """Marginals and absorption data for a batch of independent paths.

    states[i, k] is path i at times[k]; +inf after explosion, 0 after
    discrete extinction, NaN after an inconclusive stop (event budget).
    absorb_time[i] is the explosion or extinction time, +inf when the path
    reached the horizon alive. accepted + rejected equals the path count of
    the ensemble this one was filtered from (a raw ensemble accepts all).
    """

    kind: str  # "csbp" or "dsbp"
    mechanism: dict
    times: np.ndarray
    states: np.ndarray
    flags: np.ndarray
    absorb_time: np.ndarray
    n_events: np.ndarray
    seed: int
    config_hash: str
    truncation_bias: float = 0.0
    accepted: int = 0
    rejected: int = 0

    @property
    def n_paths(self) -> int:
        return self.states.shape[0]

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / max(self.accepted + self.rejected, 1)

    @property
    def inconclusive_fraction(self) -> float:
        return float(np.mean(self.flags == FLAG_INCONCLUSIVE))

    def marginal(self, t: float) -> np.ndarray:
        """Column of states at a requested time (exact match required)."""
        hits = np.nonzero(self.times == t)[0]
        if hits.size == 0:
            raise ContractError(f"time {t} was not among the sampled marginal times")
        return self.states[:, hits[0]]

    def alive_mask(self, t: float) -> np.ndarray:
        """Paths with a finite positive state at time t."""
        col = self.marginal(t)
        with np.errstate(invalid="ignore"):
            return np.isfinite(col) & (col > 0.0)


def _validate_times(times, horizon: float) -> np.ndarray:
    arr = np.asarray(list(times), dtype=np.float64)
    if arr.size == 0:
        raise ContractError("at least one marginal time is required")
    if not np.all(arr > 0.0):
        raise ContractError("marginal times must be positive")
    if not np.all(np.diff(arr) > 0.0):
        raise ContractError("marginal times must be strictly increasing")
    if arr[-1] > horizon:
        raise ContractError("marginal times must not exceed the horizon")
    return arr


def _run_partitioned(kernel_call, n_paths: int, threads: int) -> None:
    # Disjoint row ranges per task; per-path streams make any split identical.
    if threads <= 1 or n_paths < 2:
        kernel_call(0, n_paths)
        return
    chunk = max(1, min(_CHUNK, -(-n_paths // (4 * threads))))
    bounds = list(range(0, n_paths, chunk)) + [n_paths]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [
            pool.submit(kernel_call, lo, hi)
            for lo, hi in zip(bounds[:-1], bounds[1:])
            if hi > lo
        ]
        for fut in futures:
            fut.result()


def simulate_csbp(
    mech: BranchingMechanism, x: float, times, cfg: SimConfig
) -> TrajectoryEnsemble:
    """Exact event-driven paths of a finite-variation mechanism from state x.

    Infinite-activity jump measures are truncated below cfg.small_jump_cutoff
    and the dropped drift per unit population appears as truncation_bias.
    Infinite-variation mechanisms are rejected (the quadratic case has the
    exact transition sampler simulate_feller).
    """
    if not x > 0.0:
        raise ContractError("initial state must be positive")
    if x >= cfg.explosion_threshold:
        raise ContractError("initial state must lie below the explosion threshold")
    deco = jump_decomposition(mech, eps=cfg.small_jump_cutoff)
    tgrid = _validate_times(times, cfg.horizon)

    n = cfg.n_paths
    masses = np.ascontiguousarray([p[0] for p in deco.parts], dtype=np.float64)
    kinds = np.ascontiguousarray([p[1] for p in deco.parts], dtype=np.int64)
    par_a = np.ascontiguousarray([p[2] for p in deco.parts], dtype=np.float64)
    par_b = np.ascontiguousarray([p[3] for p in deco.parts], dtype=np.float64)
    states = np.zeros((n, tgrid.size), dtype=np.float64)
    absorb = np.full(n, np.inf, dtype=np.float64)
    flags = np.zeros(n, dtype=np.int8)
    events = np.zeros(n, dtype=np.int64)
    seed = int(cfg.seed) & _MASK64

    def call(lo: int, hi: int) -> None:
        _kernels.csbp_paths(
            float(x),
            float(deco.D),
            masses,
            kinds,
            par_a,
            par_b,
            tgrid,
            float(cfg.horizon),
            float(cfg.explosion_threshold),
            int(cfg.max_events),
            seed,
            lo,
            hi,
            states,
            absorb,
            flags,
            events,
        )

    _run_partitioned(call, n, cfg.threads)

    payload = {"config": cfg.to_config(), "mechanism": mechanism_to_config(mech), "x": x}
    return TrajectoryEnsemble(
        kind="csbp",
        mechanism=mechanism_to_config(mech),
        times=tgrid,
        states=states,
        flags=flags,
        absorb_time=absorb,
        n_events=events,
        seed=seed,
        config_hash=_config_hash(payload),
        truncation_bias=deco.drift_defect,
        accepted=n,
        rejected=0,
    )


def simulate_dsbp(
    d: DiscreteBranching, n0: int, times, cfg: SimConfig
) -> TrajectoryEnsemble:
    """Population-level event-driven paths of a discrete branching process.

    Each event replaces one individual (chosen implicitly; only the total
    matters) by an offspring draw from the reproduction law.
    """
    if n0 < 1 or n0 != int(n0):
        raise ContractError("initial population must be a positive integer")
    if n0 >= cfg.explosion_threshold:
        raise ContractError("initial population must lie below the explosion threshold")
    tgrid = _validate_times(times, cfg.horizon)
    cdf, tail_coef, tail_inv_alpha = offspring_sampling_table(d.xi)
    cdf = np.ascontiguousarray(cdf, dtype=np.float64)

    n = cfg.n_paths
    states = np.zeros((n, tgrid.size), dtype=np.float64)
    absorb = np.full(n, np.inf, dtype=np.float64)
    flags = np.zeros(n, dtype=np.int8)
    events = np.zeros(n, dtype=np.int64)
    seed = int(cfg.seed) & _MASK64

    def call(lo: int, hi: int) -> None:
        _kernels.dsbp_paths(
            float(n0),
            float(d.c),
            cdf,
            float(tail_coef),
            float(tail_inv_alpha),
            tgrid,
            float(cfg.horizon),
            float(cfg.explosion_threshold),
            int(cfg.max_events),
            seed,
            lo,
            hi,
            states,
            absorb,
            flags,
            events,
        )

    _run_partitioned(call, n, cfg.threads)

    payload = {"config": cfg.to_config(), "mechanism": d.to_config(), "n0": int(n0)}
    return TrajectoryEnsemble(
        kind="dsbp",
        mechanism=d.to_config(),
        times=tgrid,
        states=states,
        flags=flags,
        absorb_time=absorb,
        n_events=events,
        seed=seed,
        config_hash=_config_hash(payload),
        truncation_bias=0.0,
        accepted=n,
        rejected=0,
    )


def simulate_feller(c: float, x: float, t: float, cfg: SimConfig) -> np.ndarray:
    """Exact quadratic-mechanism transition samples of the state at time t.

    Uses the Poisson-Gamma mixture: J Poisson with mean x/(c t), then a
    Gamma(J, scale c t) value, zero when J is zero. Matches the transform
    exp(-x lam / (1 + lam c t)) exactly in law.
    """
    if not (c > 0.0 and x > 0.0 and t > 0.0):
        raise ContractError("quadratic transition sampling needs c, x, t all positive")
    rng = np.random.Generator(np.random.Philox(seed=int(cfg.seed) & _MASK64))
    j = rng.poisson(x / (c * t), size=cfg.n_paths)
    return rng.standard_gamma(j.astype(np.float64)) * (c * t)


def simulate_feller_paths(c: float, x: float, times, cfg: SimConfig) -> TrajectoryEnsemble:
    """Exact quadratic-mechanism paths sampled on the marginal grid.

    Chains the exact Poisson-Gamma transition between consecutive grid
    times; zero is absorbing and exact. Absorption is detected at grid
    resolution, so absorb_time is the first grid time with a zero state
    (the true hitting time lies in the preceding interval).
    """
    if not (c > 0.0 and x > 0.0):
        raise ContractError("quadratic path sampling needs c and x positive")
    tgrid = _validate_times(times, cfg.horizon)
    rng = np.random.Generator(np.random.Philox(seed=int(cfg.seed) & _MASK64))
    n = cfg.n_paths
    states = np.empty((n, tgrid.size), dtype=np.float64)
    z = np.full(n, float(x))
    prev = 0.0
    for k, t in enumerate(tgrid):
        dt = t - prev
        j = rng.poisson(z / (c * dt))
        z = rng.standard_gamma(j.astype(np.float64)) * (c * dt)
        states[:, k] = z
        prev = t
    dead = states == 0.0
    hit = dead.any(axis=1)
    first = np.argmax(dead, axis=1)
    absorb = np.where(hit, tgrid[first], np.inf)
    flags = np.where(hit, FLAG_EXTINCT, FLAG_SURVIVED).astype(np.int8)

    mech_cfg = {"family": "stable_plus", "c": float(c), "alpha": 1.0}
    payload = {"config": cfg.to_config(), "mechanism": mech_cfg, "x": float(x)}
    return TrajectoryEnsemble(
        kind="csbp",
        mechanism=mech_cfg,
        times=tgrid,
        states=states,
        flags=flags,
        absorb_time=absorb,
        n_events=np.zeros(n, dtype=np.int64),
        seed=int(cfg.seed) & _MASK64,
        config_hash=_config_hash(payload),
        truncation_bias=0.0,
        accepted=n,
        rejected=0,
    )


def conditional_ensemble(ens: TrajectoryEnsemble, t: float) -> TrajectoryEnsemble:
    """Rejection filter keeping paths still alive (finite, nonzero) at time t.

    t = 0 never binds and returns the identity filter. Zero accepted paths
    is a statistical-power failure, not an empty result.
    """
    if t == 0.0:
        mask = np.ones(ens.n_paths, dtype=bool)
    else:
        mask = ens.alive_mask(t)
    accepted = int(np.count_nonzero(mask))
    if accepted == 0:
        raise StatisticalPowerError(
            f"conditioning on survival past t={t} accepted none of "
            f"{ens.n_paths} paths; lower t or raise n_paths"
        )
    return TrajectoryEnsemble(
        kind=ens.kind,
        mechanism=ens.mechanism,
        times=ens.times,
        states=ens.states[mask],
        flags=ens.flags[mask],
        absorb_time=ens.absorb_time[mask],
        n_events=ens.n_events[mask],
        seed=ens.seed,
        config_hash=ens.config_hash,
        truncation_bias=ens.truncation_bias,
        accepted=accepted,
        rejected=ens.n_paths - accepted,
    )


def _mean_with_se(vals: np.ndarray) -> EstimateWithCI:
    n = vals.size
    point = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return EstimateWithCI(point=point, standard_error=se, n_effective=n)


def empirical_laplace(samples, lam: float) -> EstimateWithCI:
    """Mean of exp(-lam * Z) over the samples, with CLT standard error."""
    arr = np.asarray(samples, dtype=np.float64)
    if arr.size == 0:
        raise ContractError("transform estimation needs at least one sample")
    if not np.all(np.isfinite(arr)):
        raise ContractError(
            "samples must be finite: filter exploded or inconclusive paths first"
        )
    if not lam >= 0.0:
        raise ContractError("transform argument must be nonnegative")
    return _mean_with_se(np.exp(-lam * arr))


def laplace_with_absorption(values, lam: float) -> EstimateWithCI:
    """Mean of exp(-lam * Z) where an exploded path (Z = +inf) contributes 0.

    This is the unconditioned transform of a possibly exploding marginal.
    Inconclusive paths (NaN) are a contract violation here: they carry no
    usable value and must be resolved by raising the event budget.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise ContractError("transform estimation needs at least one sample")
    if np.any(np.isnan(arr)):
        raise ContractError(
            "inconclusive paths present: raise max_events before estimating transforms"
        )
    if not lam > 0.0:
        raise ContractError("absorption-aware transform needs lam > 0")
    with np.errstate(over="ignore"):
        vals = np.where(np.isinf(arr), 0.0, np.exp(-lam * np.where(np.isinf(arr), 0.0, arr)))
    return _mean_with_se(vals)


def empirical_pgf(samples, r: float) -> EstimateWithCI:
    """Mean of r**Z over the samples, with CLT standard error."""
    arr = np.asarray(samples, dtype=np.float64)
    if arr.size == 0:
        raise ContractError("transform estimation needs at least one sample")
    if not np.all(np.isfinite(arr)):
        raise ContractError(
            "samples must be finite: filter exploded or inconclusive paths first"
        )
    if not 0.0 <= r <= 1.0:
        raise ContractError("generating-function argument must lie in [0, 1]")
    return _mean_with_se(np.power(r, arr))
