"""Trajectory driver, steady-state detection, ensembles, sweeps, criticality.

Time convention: one sweep = L^2 elementary updates = one model time unit
(each update advances time by 1/L^2). Concentrations are sampled at sweep
boundaries, including the initial state.

Seeding contract: every random stream in this package is a PCG64 generator
seeded as ``SeedSequence([base_seed, *context])``. A plain run uses context
(); ensemble replica i uses (i); operations that evaluate several ensembles
prepend an evaluation index, e.g. sweep node j replica i uses (j, i). The
contract makes replicas independent, order-insensitive and reproducible.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .lattice import advance, concentrations, init_lattice
from .types import (
    AdvertisingField,
    ConfigError,
    DomainError,
    ModelKind,
    ScanAmbiguityError,
    Shares,
)

DEFAULT_DELTA_T = 100
DEFAULT_EPSILON = 0.005
DEFAULT_MAX_SWEEPS = 5000
DEFAULT_EXTINCTION_THRESHOLD = 0.005
DEFAULT_HC_TOLERANCE = 0.01
HC_SCAN_POINTS = 11


def derive_rng(base_seed: int, *context: int) -> np.random.Generator:
    """The package-wide stream: PCG64(SeedSequence([base_seed, *context]))."""
    return np.random.default_rng(np.random.SeedSequence([int(base_seed), *map(int, context)]))


@dataclass(frozen=True)
class SimConfig:
    """One simulation setup: rule variant, lattice, parameters, seed."""

    model: ModelKind
    L: int
    p: float
    field: AdvertisingField
    c0: Shares
    seed: int
    max_sweeps: int = DEFAULT_MAX_SWEEPS

    def __post_init__(self):
        if not isinstance(self.model, ModelKind):
            raise DomainError(f"model must be ModelKind, got {self.model!r}")
        if self.L < 4:
            raise DomainError(f"lattice side {self.L} < 4")
        if not (0.0 <= self.p <= 1.0):
            raise DomainError(f"conformity p={self.p!r} outside [0, 1]")
        if self.max_sweeps < 1:
            raise ConfigError(f"max_sweeps={self.max_sweeps} < 1")
        if self.seed < 0:
            raise ConfigError(f"seed={self.seed} must be non-negative")


@dataclass(frozen=True)
class Trajectory:
    """Recorded concentrations: times in sweeps, shares as an (n, 3) array."""

    times: np.ndarray
    shares: np.ndarray

    def share_points(self):
        return [Shares.from_array(row) for row in self.shares]


@dataclass(frozen=True)
class SteadyStateResult:
    c_inf: Shares
    t_T: int  # termalization time, sweeps
    delta_T: int  # averaging window, sweeps
    converged: bool


@dataclass(frozen=True)
class EnsembleResult:
    """Per-operator mean and standard error of c_inf over replicas."""

    mean: Shares
    se: np.ndarray  # (3,)
    replicas: np.ndarray  # (n, 3), ordered by replica index
    n_converged: int


@dataclass(frozen=True)
class PhasePoint:
    p: float
    h: float
    c0: float
    mean: Shares
    se: np.ndarray


@dataclass(frozen=True)
class PhaseDiagram:
    points: list
    p_values: tuple
    h_values: tuple
    c0_values: tuple


@dataclass(frozen=True)
class CriticalField:
    """Bisection result for the critical advertising level.

    ``h_c`` is None when no critical level exists on the scanned range.
    ``scan`` keeps every ensemble evaluation as (h, EnsembleResult) in
    evaluation order (grid scan first, then bisection midpoints).
    """

    p: float
    h_c: float | None
    bracket: tuple | None
    tolerance: float
    scan: list = field(default_factory=list)


def incumbent_share(mean: Shares) -> float:
    """The symmetric-incumbent summary: average of the two incumbent shares."""
    return (mean.c1 + mean.c2) / 2.0


def run_trajectory(config: SimConfig, total_updates: int,
                   record_every: int | None = None) -> Trajectory:
    """Run ``total_updates`` elementary updates, recording concentrations.

    Records the initial state, then every ``record_every`` updates (default
    one sweep = L^2), and always the final state.
    """
    if total_updates < 1:
        raise ConfigError(f"total_updates={total_updates} < 1")
    if record_every is None:
        record_every = config.L * config.L
    if record_every < 1:
        raise ConfigError(f"record_every={record_every} < 1")
    rng = derive_rng(config.seed)
    lat = init_lattice(config.L, config.c0, rng)
    sweep_len = config.L * config.L
    times = [0.0]
    rows = [concentrations(lat).as_array()]
    done = 0
    while done < total_updates:
        step = min(record_every, total_updates - done)
        advance(lat, config.model, config.p, config.field, step, rng)
        done += step
        times.append(done / sweep_len)
        rows.append(concentrations(lat).as_array())
    return Trajectory(np.array(times), np.array(rows))


def _steady(config: SimConfig, rng, delta_T: int, epsilon: float):
    """Core steady-state loop. Returns (result, per-sweep samples array)."""
    lat = init_lattice(config.L, config.c0, rng)
    sweep_len = config.L * config.L
    samples = np.zeros((config.max_sweeps + 1, 3))
    samples[0] = concentrations(lat).as_array()
    # cumulative sums of sweep-boundary samples; csum[k] = sum of samples[0:k]
    csum = np.zeros((config.max_sweeps + 2, 3))
    csum[1] = samples[0]
    for t in range(1, config.max_sweeps + 1):
        advance(lat, config.model, config.p, config.field, sweep_len, rng)
        samples[t] = concentrations(lat).as_array()
        csum[t + 1] = csum[t] + samples[t]
        t_T = t + 1 - 2 * delta_T
        if t_T >= 0:
            w1 = (csum[t_T + delta_T] - csum[t_T]) / delta_T
            w2 = (csum[t_T + 2 * delta_T] - csum[t_T + delta_T]) / delta_T
            if np.max(np.abs(w1 - w2)) < epsilon:
                return (SteadyStateResult(Shares.from_array(w1), t_T, delta_T, True),
                        samples[:t + 1])
    # Window test never fired: average the freshest full window instead.
    n = min(delta_T, config.max_sweeps + 1)
    w = (csum[config.max_sweeps + 1] - csum[config.max_sweeps + 1 - n]) / n
    return (SteadyStateResult(Shares.from_array(w), config.max_sweeps + 1 - n,
                              delta_T, False), samples)


def run_to_steady(config: SimConfig, delta_T: int = DEFAULT_DELTA_T,
                  epsilon: float = DEFAULT_EPSILON) -> SteadyStateResult:
    """Advance sweep by sweep until the concentrations settle.

    Steady state is declared at the first t_T where consecutive delta_T-sweep
    window means of every share differ by less than epsilon; c_inf is the
    mean over [t_T, t_T + delta_T). Hitting max_sweeps is reported via
    ``converged=False`` (the final window mean is still returned).
    """
    if delta_T < 1:
        raise ConfigError(f"delta_T={delta_T} < 1")
    if epsilon <= 0.0:
        raise ConfigError(f"epsilon={epsilon!r} must be > 0")
    return _steady(config, derive_rng(config.seed), delta_T, epsilon)[0]


def ensemble_steady(config: SimConfig, n_samples: int,
                    delta_T: int = DEFAULT_DELTA_T, epsilon: float = DEFAULT_EPSILON,
                    threads: int = 1, seed_path: tuple = ()) -> EnsembleResult:
    """Mean and standard error of c_inf over independent replicas.

    Replica i draws its stream from context ``(*seed_path, i)``; results are
    keyed by replica index, so any execution order (or thread count) yields
    the same output.
    """
    if n_samples < 2:
        raise ConfigError(f"n_samples={n_samples} < 2")
    if delta_T < 1:
        raise ConfigError(f"delta_T={delta_T} < 1")
    if epsilon <= 0.0:
        raise ConfigError(f"epsilon={epsilon!r} must be > 0")

    def one(i: int) -> SteadyStateResult:
        return _steady(config, derive_rng(config.seed, *seed_path, i), delta_T, epsilon)[0]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(one, range(n_samples)))
    else:
        results = [one(i) for i in range(n_samples)]
    reps = np.array([r.c_inf.as_array() for r in results])
    mean = reps.mean(axis=0)
    se = reps.std(axis=0, ddof=1) / np.sqrt(n_samples)
    return EnsembleResult(Shares.from_array(mean), se, reps,
                          sum(r.converged for r in results))


def _symmetric_node(h: float, c0: float):
    if not (0.0 <= h <= 0.5):
        raise DomainError(f"symmetric incumbent advertising h={h!r} outside [0, 0.5]")
    if not (0.0 < c0 < 0.5):
        raise DomainError(f"symmetric incumbent share c0={c0!r} outside (0, 0.5)")
    return AdvertisingField.symmetric(h), Shares.symmetric(c0)


def sweep(model: ModelKind, p_values, h_values, c0_values, L: int,
          n_samples: int, seed: int, delta_T: int = DEFAULT_DELTA_T,
          epsilon: float = DEFAULT_EPSILON, max_sweeps: int = DEFAULT_MAX_SWEEPS,
          threads: int = 1) -> PhaseDiagram:
    """Ensemble c_inf over a (p, h, c0) grid in symmetric-incumbent mode.

    Each node gets field (h, h, 1-2h) and initial shares (c0, c0, 1-2c0).
    Nodes are enumerated row-major (p outer, h, then c0); node j replica i
    uses stream context (j, i).
    """
    p_values, h_values, c0_values = map(tuple, (p_values, h_values, c0_values))
    if not (p_values and h_values and c0_values):
        raise ConfigError("sweep grids must be non-empty")
    points = []
    node = 0
    for p in p_values:
        for h in h_values:
            for c0 in c0_values:
                fld, shares0 = _symmetric_node(h, c0)
                cfg = SimConfig(model, L, p, fld, shares0, seed, max_sweeps)
                res = ensemble_steady(cfg, n_samples, delta_T, epsilon,
                                      threads=threads, seed_path=(node,))
                points.append(PhasePoint(p, h, c0, res.mean, res.se))
                node += 1
    return PhaseDiagram(points, p_values, h_values, c0_values)


def _evaluate_h(model, p, h, c0, L, n_samples, seed, eval_index,
                delta_T, epsilon, max_sweeps, threads) -> EnsembleResult:
    """Ensemble steady state at one symmetric-incumbent h."""
    fld, shares0 = _symmetric_node(h, c0)
    cfg = SimConfig(model, L, p, fld, shares0, seed, max_sweeps)
    return ensemble_steady(cfg, n_samples, delta_T, epsilon,
                           threads=threads, seed_path=(eval_index,))


def find_hc(model: ModelKind, p: float, c0: float, L: int,
            extinction_threshold: float = DEFAULT_EXTINCTION_THRESHOLD,
            tolerance: float = DEFAULT_HC_TOLERANCE, n_samples: int = 100,
            seed: int = 1, delta_T: int = DEFAULT_DELTA_T,
            epsilon: float = DEFAULT_EPSILON, max_sweeps: int = DEFAULT_MAX_SWEEPS,
            threads: int = 1) -> CriticalField:
    """Locate the critical advertising level via scan plus bisection.

    Scans 11 equispaced h on [0, 0.5]; a point is extinct when the ensemble
    incumbent mean falls strictly below ``extinction_threshold``. When no
    positive-h scan point is extinct, or h = 0.5 does not survive, there is
    no critical level and ``h_c`` is None. Otherwise bisects the extinct /
    surviving bracket down to ``tolerance``. A non-monotone extinct pattern
    across the scan raises :class:`ScanAmbiguityError` with the scan data.
    """
    if not (0.0 <= p <= 1.0):
        raise DomainError(f"conformity p={p!r} outside [0, 1]")
    if tolerance <= 0.0:
        raise ConfigError(f"tolerance={tolerance!r} must be > 0")
    scan_h = np.linspace(0.0, 0.5, HC_SCAN_POINTS)
    scan = []
    eval_index = 0
    for h in scan_h:
        res = _evaluate_h(model, p, float(h), c0, L, n_samples, seed,
                          eval_index, delta_T, epsilon, max_sweeps, threads)
        scan.append((float(h), res))
        eval_index += 1
    extinct = [incumbent_share(res.mean) < extinction_threshold for _, res in scan]
    # Monotone pattern: all extinct points precede all surviving ones.
    first_surviving = next((i for i, e in enumerate(extinct) if not e), len(extinct))
    if any(extinct[first_surviving:]):
        raise ScanAmbiguityError(
            "extinction indicator not monotone across the h scan",
            [(h, incumbent_share(res.mean)) for h, res in scan])
    # Existence on the scanned range: an extinct point at positive h and a
    # surviving point at h = 0.5.
    positive_extinct = [i for i, e in enumerate(extinct) if e and scan_h[i] > 0.0]
    if not positive_extinct or extinct[-1]:
        return CriticalField(p, None, None, tolerance, scan)
    lo = float(scan_h[positive_extinct[-1]])
    hi = float(scan_h[first_surviving])
    while hi - lo > tolerance:
        mid = (lo + hi) / 2.0
        res = _evaluate_h(model, p, mid, c0, L, n_samples, seed,
                          eval_index, delta_T, epsilon, max_sweeps, threads)
        scan.append((mid, res))
        eval_index += 1
        if incumbent_share(res.mean) < extinction_threshold:
            lo = mid
        else:
            hi = mid
    return CriticalField(p, (lo + hi) / 2.0, (lo, hi), tolerance, scan)
