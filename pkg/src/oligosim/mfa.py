"""Mean-field evolution maps for the CF and CAP rules.

Both maps advance the concentration triple by one time unit:

    c'_s = c_s + (1 - p)(h_s - c_s)
               + k * c_s * [c_a (c_s^3 - c_a^3) + c_b (c_s^3 - c_b^3)]

with (a, b) the two competitors of s, and k = p for CAP, k = 1 for CF.
At p = 1 the two maps coincide. The pairwise cubic terms cancel across
operators, so the raw increments always sum to zero; the CAP map stays on
the simplex, while the CF map can push a component negative for extreme
(h, c) combinations. Negative raw components are clamped to zero and the
triple renormalized, with the intervention reported via a flag.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import AdvertisingField, ConfigError, DomainError, ModelKind, Shares

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10 ** 6

# Raw components above this magnitude below zero count as real constraint
# violations; anything smaller is float dust and is snapped silently.
_CLAMP_DUST = 1e-14


@dataclass(frozen=True)
class FixedPointResult:
    c_inf: Shares
    iterations: int
    residual: float  # max-norm of the last increment
    clamped: bool  # any clamping on the way to the fixed point


def raw_increments(model: ModelKind, c, p, h) -> np.ndarray:
    """Per-operator increments of the map; broadcasts over leading axes.

    ``c`` and ``h`` are arrays with the operator axis last (shape (..., 3));
    ``p`` is scalar or shape (...,).
    """
    c = np.asarray(c, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    k = p if model is ModelKind.CAP else np.float64(1.0)
    c3 = c ** 3
    inc = np.empty_like(c)
    for s in range(3):
        a, b = (s + 1) % 3, (s + 2) % 3
        social = c[..., a] * (c3[..., s] - c3[..., a]) + c[..., b] * (c3[..., s] - c3[..., b])
        inc[..., s] = (1.0 - p) * (h[..., s] - c[..., s]) + k * c[..., s] * social
    return inc


def _step_array(model: ModelKind, c: np.ndarray, p: float, h: np.ndarray):
    """One map application on a plain (3,) array. Returns (c_next, clamped)."""
    raw = c + raw_increments(model, c, p, h)
    clamped = bool(np.any(raw < -_CLAMP_DUST))
    if np.any(raw < 0.0):
        raw = np.maximum(raw, 0.0)
        raw = raw / raw.sum()
    return raw, clamped


def mfa_step(model: ModelKind, c: Shares, p: float, h: AdvertisingField) -> Shares:
    """Advance the concentrations by one time unit."""
    if not (0.0 <= p <= 1.0):
        raise DomainError(f"conformity p={p!r} outside [0, 1]")
    nxt, _ = _step_array(model, c.as_array(), p, h.as_array())
    return Shares.from_array(nxt)


def mfa_fixed_point(model: ModelKind, c0: Shares, p: float, h: AdvertisingField,
                    tol: float = DEFAULT_TOL,
                    max_iter: int = DEFAULT_MAX_ITER) -> FixedPointResult:
    """Iterate the map from c0 until the max-norm increment drops below tol.

    Non-convergence is not an error: the last state is returned with
    ``residual`` still above tol.
    """
    if tol <= 0.0:
        raise ConfigError(f"tol={tol!r} must be > 0")
    if not (0.0 <= p <= 1.0):
        raise DomainError(f"conformity p={p!r} outside [0, 1]")
    c = c0.as_array()
    harr = h.as_array()
    clamped_any = False
    residual = np.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        nxt, clamped = _step_array(model, c, p, harr)
        clamped_any = clamped_any or clamped
        residual = float(np.max(np.abs(nxt - c)))
        c = nxt
        if residual < tol:
            break
    return FixedPointResult(Shares.from_array(c), iterations, residual, clamped_any)


def fixed_point_scan(model: ModelKind, p_values, h_values, c0: float,
                     tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER):
    """Fixed points over a (p, h) grid in symmetric-incumbent mode.

    Yields (p, h, c0, FixedPointResult) per node, row-major with p outer.
    """
    for p in p_values:
        for h in h_values:
            fld = AdvertisingField.symmetric(h)
            shares0 = Shares.symmetric(c0)
            yield p, h, c0, mfa_fixed_point(model, shares0, p, fld, tol, max_iter)
