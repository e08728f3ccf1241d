"""Shared value types: operators, simplex triples, model variants, errors."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

OPERATORS = (1, 2, 3)

# Tolerance for the sum-to-one check on simplex triples.
SIMPLEX_TOL = 1e-12


class DomainError(ValueError):
    """A value violates its domain contract (off-simplex triple, bad p, ...)."""


class DimensionError(DomainError):
    """Lattice side too small: panel and neighbor sets would collide."""


class ConfigError(ValueError):
    """Inconsistent run configuration (caps, divisibility, grids)."""


class ParseError(ValueError):
    """Malformed input file; the message names the offending row."""


class ScanAmbiguityError(RuntimeError):
    """The extinction indicator was not monotone across the scan grid.

    Carries the scan data as ``scan``: a list of (h, incumbent_mean) pairs.
    """

    def __init__(self, message: str, scan):
        super().__init__(message)
        self.scan = list(scan)


class ModelKind(enum.Enum):
    """Update-rule variant.

    CF: unanimous panels always convert their neighborhood; advertising acts
    only on neighbors of non-unanimous panels, each with probability 1 - p.
    CAP: each neighbor independently receives the social channel (probability
    p, effective only under unanimity) or the advertising channel (1 - p).
    """

    CF = "cf"
    CAP = "cap"

    @classmethod
    def parse(cls, text: str) -> "ModelKind":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise DomainError(f"unknown model {text!r}; expected 'cf' or 'cap'") from None


def _check_triple(name: str, a: float, b: float, c: float) -> None:
    for v in (a, b, c):
        if not (0.0 <= v <= 1.0) or not np.isfinite(v):
            raise DomainError(f"{name} component {v!r} outside [0, 1]")
    s = a + b + c
    if abs(s - 1.0) > SIMPLEX_TOL:
        raise DomainError(f"{name} ({a}, {b}, {c}) sums to {s!r}, not 1")


@dataclass(frozen=True)
class Shares:
    """Market concentrations (c1, c2, c3) on the probability simplex."""

    c1: float
    c2: float
    c3: float

    def __post_init__(self):
        _check_triple("shares", self.c1, self.c2, self.c3)

    def as_array(self) -> np.ndarray:
        return np.array([self.c1, self.c2, self.c3], dtype=np.float64)

    @classmethod
    def from_array(cls, arr) -> "Shares":
        return cls(float(arr[0]), float(arr[1]), float(arr[2]))

    @classmethod
    def symmetric(cls, c0: float) -> "Shares":
        """(c0, c0, 1 - 2*c0): equal incumbents, the entrant takes the rest."""
        return cls(c0, c0, 1.0 - 2.0 * c0)


@dataclass(frozen=True)
class AdvertisingField:
    """Global advertising probabilities (h1, h2, h3), one per operator."""

    h1: float
    h2: float
    h3: float

    def __post_init__(self):
        _check_triple("advertising field", self.h1, self.h2, self.h3)

    def as_array(self) -> np.ndarray:
        return np.array([self.h1, self.h2, self.h3], dtype=np.float64)

    @classmethod
    def from_array(cls, arr) -> "AdvertisingField":
        return cls(float(arr[0]), float(arr[1]), float(arr[2]))

    @classmethod
    def symmetric(cls, h: float) -> "AdvertisingField":
        """(h, h, 1 - 2*h): equal incumbent advertising."""
        return cls(h, h, 1.0 - 2.0 * h)
