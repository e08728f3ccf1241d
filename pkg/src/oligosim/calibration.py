"""Quarterly market data, advertising schedules, band simulation, p fitting.

The input CSV carries one row per quarter: observed (income-based) market
shares and advertising shares, both probability triples. The advertising
columns become a piecewise-constant field schedule; optional adjustments
scale one operator's level over a quarter range (relative factor, triple
renormalized afterwards). Trajectories run a fixed number of elementary
updates per quarter and are summarized by per-quarter quantile bands or by
an ensemble-mean fit of the conformity level.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .engine import derive_rng
from .lattice import advance, concentrations, init_lattice
from .types import AdvertisingField, ConfigError, DomainError, ModelKind, ParseError, Shares

CSV_COLUMNS = ("quarter", "share_1", "share_2", "share_3", "adv_1", "adv_2", "adv_3")

# Empirical quantiles use Weibull plotting positions: linear interpolation
# between order statistics, clamping to min / max in the tails (so n = 2
# gives lower = min, upper = max).
QUANTILE_METHOD = "weibull"
BAND_PROBS = (0.025, 0.5, 0.975)

# Row triples may be off the simplex by at most this much before rejection.
ROW_SUM_TOL = 1e-6


@dataclass(frozen=True)
class QuarterRecord:
    quarter: int
    shares: Shares
    adv: AdvertisingField


@dataclass(frozen=True)
class MarketSeries:
    records: tuple

    @property
    def T(self) -> int:
        return len(self.records)

    def observed_matrix(self) -> np.ndarray:
        return np.array([r.shares.as_array() for r in self.records])

    def adv_matrix(self) -> np.ndarray:
        return np.array([r.adv.as_array() for r in self.records])


@dataclass(frozen=True)
class Adjustment:
    """Scale one operator's advertising by ``factor`` over quarters [t_from, t_to]."""

    operator: int
    t_from: int
    t_to: int
    factor: float

    def __post_init__(self):
        if self.operator not in (1, 2, 3):
            raise DomainError(f"adjustment operator {self.operator!r} not in {{1,2,3}}")
        if not (0.0 < self.factor <= 1.0):
            raise DomainError(f"adjustment factor {self.factor!r} outside (0, 1]")
        if self.t_from > self.t_to:
            raise DomainError(f"adjustment range [{self.t_from}, {self.t_to}] is empty")


@dataclass(frozen=True)
class AdvertisingSchedule:
    fields: tuple  # one AdvertisingField per quarter
    updates_per_quarter: int

    @property
    def T(self) -> int:
        return len(self.fields)

    @property
    def total_updates(self) -> int:
        return self.T * self.updates_per_quarter


@dataclass(frozen=True)
class QuantileBands:
    """Per-quarter lower / median / upper share envelopes, (T, 3) each."""

    quarters: np.ndarray
    lower: np.ndarray
    median: np.ndarray
    upper: np.ndarray
    n_trajectories: int


@dataclass(frozen=True)
class FitResult:
    p_grid: np.ndarray
    scores: np.ndarray
    best_p: float
    score_tag: str = "ensemble_mean_mse"


def _parse_triple(row, cols, row_no, kind):
    try:
        vals = [float(row[c]) for c in cols]
    except ValueError as e:
        raise ParseError(f"row {row_no}: non-numeric {kind} value ({e})") from None
    for v in vals:
        if not (0.0 <= v <= 1.0):
            raise ParseError(f"row {row_no}: {kind} component {v} outside [0, 1]")
    s = sum(vals)
    if abs(s - 1.0) > ROW_SUM_TOL:
        raise ParseError(f"row {row_no}: {kind} triple sums to {s!r}, off by more than {ROW_SUM_TOL}")
    return [v / s for v in vals]


def load_series(path) -> MarketSeries:
    """Read and validate a quarterly market CSV.

    Quarters must be contiguous from 1 and T >= 2; each triple must sum to
    one within 1e-6 (it is renormalized exactly). Errors name the offending
    row.
    """
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in CSV_COLUMNS if c not in header]
        if missing:
            raise ParseError(f"{path}: missing columns {missing}")
        records = []
        for row_no, row in enumerate(reader, start=1):
            try:
                quarter = int(row["quarter"])
            except ValueError:
                raise ParseError(f"row {row_no}: quarter {row['quarter']!r} is not an integer") from None
            if quarter != row_no:
                raise ParseError(f"row {row_no}: quarter {quarter} breaks the contiguous 1..T order")
            sh = _parse_triple(row, ("share_1", "share_2", "share_3"), row_no, "share")
            adv = _parse_triple(row, ("adv_1", "adv_2", "adv_3"), row_no, "advertising")
            records.append(QuarterRecord(quarter, Shares(*sh), AdvertisingField(*adv)))
    if len(records) < 2:
        raise ParseError(f"{path}: series has {len(records)} quarters, need at least 2")
    return MarketSeries(tuple(records))


def build_schedule(series: MarketSeries, adjustments, total_updates: int) -> AdvertisingSchedule:
    """Per-quarter advertising fields with adjustments applied.

    ``total_updates`` must divide evenly over the quarters. Each adjustment
    multiplies the target operator's level by its factor within the quarter
    range, then the triple is renormalized to sum one.
    """
    T = series.T
    if total_updates < T or total_updates % T != 0:
        raise ConfigError(f"total_updates={total_updates} is not a positive multiple of T={T}")
    fields = series.adv_matrix()
    for adj in adjustments:
        if not (1 <= adj.t_from and adj.t_to <= T):
            raise ConfigError(f"adjustment range [{adj.t_from}, {adj.t_to}] outside 1..{T}")
        rows = slice(adj.t_from - 1, adj.t_to)
        fields[rows, adj.operator - 1] *= adj.factor
        fields[rows] /= fields[rows].sum(axis=1, keepdims=True)
    return AdvertisingSchedule(tuple(AdvertisingField.from_array(f) for f in fields),
                               total_updates // T)


def run_schedule_trajectory(model: ModelKind, p: float, L: int, c0: Shares,
                            schedule: AdvertisingSchedule, rng) -> np.ndarray:
    """One trajectory under the schedule; shares at each quarter boundary, (T, 3)."""
    lat = init_lattice(L, c0, rng)
    out = np.empty((schedule.T, 3))
    for q, fld in enumerate(schedule.fields):
        advance(lat, model, p, fld, schedule.updates_per_quarter, rng)
        out[q] = concentrations(lat).as_array()
    return out


def _trajectory_matrix(model, p, L, c0, schedule, n_trajectories, seed,
                       seed_path=(), threads=1) -> np.ndarray:
    """(n, T, 3) stack of schedule trajectories, replica i on context (*seed_path, i)."""

    def one(i: int) -> np.ndarray:
        return run_schedule_trajectory(model, p, L, c0, schedule,
                                       derive_rng(seed, *seed_path, i))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(one, range(n_trajectories)))
    else:
        rows = [one(i) for i in range(n_trajectories)]
    return np.array(rows)


def simulate_bands(model: ModelKind, p: float, L: int, c0: Shares,
                   schedule: AdvertisingSchedule, n_trajectories: int, seed: int,
                   threads: int = 1) -> QuantileBands:
    """2.5% / median / 97.5% per-quarter share envelopes over an ensemble."""
    if n_trajectories < 2:
        raise ConfigError(f"n_trajectories={n_trajectories} < 2")
    if not (0.0 <= p <= 1.0):
        raise DomainError(f"conformity p={p!r} outside [0, 1]")
    sims = _trajectory_matrix(model, p, L, c0, schedule, n_trajectories, seed,
                              threads=threads)
    lo, med, hi = (np.quantile(sims, q, axis=0, method=QUANTILE_METHOD)
                   for q in BAND_PROBS)
    quarters = np.arange(1, schedule.T + 1)
    return QuantileBands(quarters, lo, med, hi, n_trajectories)


def fit_conformity(model: ModelKind, series: MarketSeries, schedule: AdvertisingSchedule,
                   L: int, c0: Shares, p_grid, n_trajectories: int, seed: int,
                   threads: int = 1) -> FitResult:
    """Grid-search the conformity level against the observed shares.

    Score per p: mean over quarters and operators of the squared error
    between the ensemble-mean simulated share and the observed share.
    Grid value j replica i uses stream context (j, i); ties on the minimum
    go to the lowest p.
    """
    p_grid = np.asarray(list(p_grid), dtype=np.float64)
    if p_grid.size == 0:
        raise ConfigError("p_grid must be non-empty")
    if np.any((p_grid < 0.0) | (p_grid > 1.0)):
        raise DomainError("p_grid values must lie in [0, 1]")
    if schedule.T != series.T:
        raise ConfigError(f"schedule has {schedule.T} quarters, series has {series.T}")
    observed = series.observed_matrix()
    scores = np.empty(p_grid.size)
    for j, p in enumerate(p_grid):
        sims = _trajectory_matrix(model, float(p), L, c0, schedule, n_trajectories,
                                  seed, seed_path=(j,), threads=threads)
        scores[j] = float(np.mean((sims.mean(axis=0) - observed) ** 2))
    best = int(np.argmin(scores))
    return FitResult(p_grid, scores, float(p_grid[best]))
