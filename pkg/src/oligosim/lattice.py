"""Square-lattice state and the elementary panel update.

The market is an L x L periodic grid of operator labels {1, 2, 3}. One
elementary update selects a site, forms the 2x2 panel whose top-left corner
is that site, and lets the panel act on the 8 sites orthogonally adjacent
to the panel block. Under CF a unanimous panel converts all 8 neighbors
deterministically, while neighbors of a non-unanimous panel each resample
from the advertising field with probability 1 - p. Under CAP each neighbor
independently takes the social channel with probability p (conversion only
if the panel is unanimous, otherwise nothing) and the advertising channel
with probability 1 - p. Neighbor outcomes are decided independently from
the pre-update panel state; panel cells never change.

Randomness contract (fixed so trajectories are reproducible bit for bit
given the generator algorithm, PCG64 throughout this package):

* site selection (trajectory driver): one ``rng.integers(0, L*L)`` call,
  decoded as ``x, y = idx // L, idx % L``;
* per neighbor, visited in the order returned by :func:`panel_geometry`:
  one uniform channel draw when the rule needs it (CF skips it entirely on
  a unanimous panel), then one uniform resample draw only when the
  advertising channel fires, mapped through the cumulative field
  (u < h1 -> 1, u < h1+h2 -> 2, else 3).

A "resample" may land on the neighbor's current operator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .types import AdvertisingField, DimensionError, DomainError, ModelKind, Shares

MIN_L = 4


@dataclass(frozen=True)
class PanelGeometry:
    """The 2x2 panel at a site and the 8 adjacent sites it influences."""

    panel: tuple
    neighbors: tuple


@dataclass
class Lattice:
    """Grid of operator labels plus a cached per-operator site tally."""

    cells: np.ndarray  # (L, L) int8, values in {1, 2, 3}
    counts: np.ndarray  # (3,) int64, counts[k] = number of sites with label k+1

    @property
    def L(self) -> int:
        return self.cells.shape[0]

    def copy(self) -> "Lattice":
        return Lattice(self.cells.copy(), self.counts.copy())


def largest_remainder_counts(c0: Shares, n_sites: int) -> np.ndarray:
    """Round c0 * n_sites to integers summing to n_sites.

    Floors first, then hands the leftover sites to the largest fractional
    remainders; remainder ties go to the lowest operator label.
    """
    quota = c0.as_array() * n_sites
    base = np.floor(quota).astype(np.int64)
    leftover = int(n_sites - base.sum())
    order = np.lexsort((np.arange(3), -(quota - base)))
    for i in range(leftover):
        base[order[i]] += 1
    return base


def init_lattice(L: int, c0: Shares, rng) -> Lattice:
    """Random lattice with exact largest-remainder operator counts.

    ``rng`` is an integer seed or a ``numpy.random.Generator``; placement is
    a uniform shuffle drawn from it.
    """
    if L < MIN_L:
        raise DimensionError(f"lattice side {L} < {MIN_L}")
    if not isinstance(c0, Shares):
        raise DomainError(f"c0 must be Shares, got {type(c0).__name__}")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(np.random.SeedSequence([int(rng)]))
    counts = largest_remainder_counts(c0, L * L)
    labels = np.repeat(np.array([1, 2, 3], dtype=np.int8), counts)
    rng.shuffle(labels)
    return Lattice(labels.reshape(L, L).copy(), counts)


def panel_geometry(site, L: int) -> PanelGeometry:
    """Panel and neighbor coordinates for the panel anchored at ``site``.

    The site is the top-left corner of the 2x2 block; all coordinates are
    reduced mod L. Requires L >= 4 so the two sets cannot collide under
    periodic wrap.
    """
    if L < MIN_L:
        raise DimensionError(f"lattice side {L} < {MIN_L}")
    x, y = site
    if not (0 <= x < L and 0 <= y < L):
        raise DomainError(f"site {site!r} outside [0, {L}) x [0, {L})")
    panel = (
        (x, y),
        ((x + 1) % L, y),
        (x, (y + 1) % L),
        ((x + 1) % L, (y + 1) % L),
    )
    neighbors = (
        ((x - 1) % L, y),
        ((x - 1) % L, (y + 1) % L),
        ((x + 2) % L, y),
        ((x + 2) % L, (y + 1) % L),
        (x, (y - 1) % L),
        ((x + 1) % L, (y - 1) % L),
        (x, (y + 2) % L),
        ((x + 1) % L, (y + 2) % L),
    )
    return PanelGeometry(panel, neighbors)


def sample_operator(h: AdvertisingField, rng) -> int:
    """Draw an operator label from the advertising field."""
    if not isinstance(h, AdvertisingField):
        raise DomainError(f"h must be AdvertisingField, got {type(h).__name__}")
    u = rng.random()
    if u < h.h1:
        return 1
    if u < h.h1 + h.h2:
        return 2
    return 3


@njit(cache=True, nogil=True)
def _update_site(cells, counts, x, y, is_cf, p, h1, h12, rng):
    """One elementary update at panel anchor (x, y). Returns changed cells."""
    L = cells.shape[0]
    o = cells[x, y]
    unanimous = (
        cells[(x + 1) % L, y] == o
        and cells[x, (y + 1) % L] == o
        and cells[(x + 1) % L, (y + 1) % L] == o
    )
    changed = 0
    for k in range(8):
        if k == 0:
            nx, ny = (x - 1) % L, y
        elif k == 1:
            nx, ny = (x - 1) % L, (y + 1) % L
        elif k == 2:
            nx, ny = (x + 2) % L, y
        elif k == 3:
            nx, ny = (x + 2) % L, (y + 1) % L
        elif k == 4:
            nx, ny = x, (y - 1) % L
        elif k == 5:
            nx, ny = (x + 1) % L, (y - 1) % L
        elif k == 6:
            nx, ny = x, (y + 2) % L
        else:
            nx, ny = (x + 1) % L, (y + 2) % L
        cur = cells[nx, ny]
        new = cur
        if is_cf:
            if unanimous:
                new = o
            elif rng.random() < 1.0 - p:
                v = rng.random()
                new = 1 if v < h1 else (2 if v < h12 else 3)
        else:
            if rng.random() < p:
                if unanimous:
                    new = o
            else:
                v = rng.random()
                new = 1 if v < h1 else (2 if v < h12 else 3)
        if new != cur:
            cells[nx, ny] = new
            counts[cur - 1] -= 1
            counts[new - 1] += 1
            changed += 1
    return changed


@njit(cache=True, nogil=True)
def _advance(cells, counts, n_updates, is_cf, p, h1, h12, rng):
    """Run n_updates elementary updates at uniformly random sites."""
    L = cells.shape[0]
    for _ in range(n_updates):
        idx = rng.integers(0, L * L)
        x = idx // L
        y = idx - x * L
        _update_site(cells, counts, x, y, is_cf, p, h1, h12, rng)


def apply_update(lattice: Lattice, site, model: ModelKind, p: float,
                 h: AdvertisingField, rng) -> int:
    """Apply one elementary update at ``site``; returns cells that changed."""
    if not (0.0 <= p <= 1.0):
        raise DomainError(f"conformity p={p!r} outside [0, 1]")
    if not isinstance(h, AdvertisingField):
        raise DomainError(f"h must be AdvertisingField, got {type(h).__name__}")
    L = lattice.L
    if L < MIN_L:
        raise DimensionError(f"lattice side {L} < {MIN_L}")
    x, y = site
    if not (0 <= x < L and 0 <= y < L):
        raise DomainError(f"site {site!r} outside [0, {L}) x [0, {L})")
    return int(_update_site(lattice.cells, lattice.counts, x, y,
                            model is ModelKind.CF, p, h.h1, h.h1 + h.h2, rng))


def advance(lattice: Lattice, model: ModelKind, p: float, h: AdvertisingField,
            n_updates: int, rng) -> None:
    """Run ``n_updates`` updates at uniformly random sites, in place."""
    if n_updates > 0:
        _advance(lattice.cells, lattice.counts, n_updates,
                 model is ModelKind.CF, p, h.h1, h.h1 + h.h2, rng)


def concentrations(lattice: Lattice) -> Shares:
    """Current market shares: cached counts divided by L^2."""
    n = lattice.L * lattice.L
    c = lattice.counts / n
    return Shares(float(c[0]), float(c[1]), float(c[2]))
