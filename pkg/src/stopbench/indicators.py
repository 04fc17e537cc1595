"""Quality indicators over normalized objectives: hypervolume, additive epsilon, R2."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np

from stopbench import kernels
from stopbench.core import (
    ConfigError,
    DimensionError,
    NormalizationBounds,
    RunTrace,
    as_points,
    normalize,
)

DEFAULT_REF = 1.1


@dataclass(frozen=True)
class HvConfig:
    """Reference point and optional normalization for hypervolume.

    With ``bounds`` set, points are normalized before measuring and the
    reference point defaults to ``(1.1, ..., 1.1)`` in normalized space.
    Without bounds the points are used as given and ``reference_point`` is
    required.
    """

    bounds: NormalizationBounds | None = None
    reference_point: np.ndarray | None = None

    def __post_init__(self):
        if self.reference_point is None:
            if self.bounds is None:
                raise ConfigError("a reference point is required without normalization bounds")
            ref = np.full(self.bounds.m, DEFAULT_REF)
        else:
            ref = np.asarray(self.reference_point, dtype=np.float64)
            if self.bounds is not None:
                if ref.shape != (self.bounds.m,):
                    raise DimensionError("reference point and bounds differ in length")
                if np.any(ref <= 1.0):
                    raise ConfigError("normalized reference point must exceed 1 in every coordinate")
        object.__setattr__(self, "reference_point", ref)

    @property
    def m(self) -> int:
        return self.reference_point.shape[0]

    def prepare(self, points) -> np.ndarray:
        P = as_points(points, self.m)
        return normalize(P, self.bounds) if self.bounds is not None else P


def hypervolume(points, cfg: HvConfig) -> float:
    """Exact hypervolume of ``points`` against ``cfg.reference_point``.

    Points that do not strictly dominate the reference point contribute
    nothing, so an empty dominated region gives 0.
    """
    P = cfg.prepare(points)
    if P.shape[0] == 0:
        return 0.0
    return float(kernels.hypervolume(P, cfg.reference_point))


def hv_series(trace: RunTrace, cfg: HvConfig) -> np.ndarray:
    """Hypervolume of each population ``P^(1) .. P^(t_max)``.

    Consecutive identical membership rows (common in steady-state runs)
    reuse the previous value.
    """
    out = np.empty(trace.meta.t_max)
    prev_row = None
    for t in range(trace.meta.t_max):
        row = trace.memberships[t]
        if prev_row is not None and np.array_equal(np.sort(row), prev_row):
            out[t] = out[t - 1]
            continue
        out[t] = hypervolume(trace.points[row - 1], cfg)
        prev_row = np.sort(row)
    return out


def best_so_far(series) -> np.ndarray:
    return np.maximum.accumulate(np.asarray(series, dtype=np.float64))


def best_so_far_hv(trace: RunTrace, cfg: HvConfig) -> np.ndarray:
    """Running maximum of the per-iteration hypervolume; non-decreasing."""
    return best_so_far(hv_series(trace, cfg))


def additive_epsilon(a, r) -> float:
    """Smallest shift making ``a`` weakly dominate every member of ``r``.

    ``max_{r in R} min_{a in A} max_i (a_i - r_i)``
    """
    A = as_points(a)
    R = as_points(r)
    if A.shape[0] == 0 or R.shape[0] == 0:
        raise ValueError("additive epsilon needs two non-empty sets")
    if A.shape[1] != R.shape[1]:
        raise DimensionError(f"dimension mismatch: {A.shape[1]} vs {R.shape[1]}")
    diff = A[:, None, :] - R[None, :, :]
    return float(diff.max(axis=2).min(axis=0).max())


def simplex_lattice(m: int, h: int) -> np.ndarray:
    """All weight vectors with entries in ``{0, 1/h, ..., 1}`` summing to one."""
    if m < 1 or h < 1:
        raise ConfigError("simplex lattice needs m >= 1 and h >= 1")
    rows = []
    # stars and bars: choose m-1 cut positions among h+m-1 slots
    for cuts in combinations(range(h + m - 1), m - 1):
        prev = -1
        parts = []
        for c in cuts:
            parts.append(c - prev - 1)
            prev = c
        parts.append(h + m - 1 - prev - 1)
        rows.append(parts)
    return np.asarray(rows, dtype=np.float64) / h


def default_r2_weights(m: int, target: int = 100) -> np.ndarray:
    """Simplex lattice whose size is the first one reaching ``target`` vectors."""
    h = 1
    while comb(h + m - 1, m - 1) < target:
        h += 1
    return simplex_lattice(m, h)


def r2(a, weights, ideal=None) -> float:
    """Mean over weights of the best weighted Tchebycheff value in ``a``.

    The utopian point defaults to the origin, i.e. the ideal point after
    normalization.
    """
    A = as_points(a)
    W = np.asarray(weights, dtype=np.float64)
    if W.ndim != 2 or W.shape[0] == 0:
        raise ConfigError("R2 needs a non-empty 2-D weight set")
    if W.shape[1] != A.shape[1]:
        raise DimensionError(f"weights have {W.shape[1]} components, points {A.shape[1]}")
    if np.any(W < 0) or not np.allclose(W.sum(axis=1), 1.0):
        raise ConfigError("R2 weights must be non-negative and sum to one")
    z = np.zeros(A.shape[1]) if ideal is None else np.asarray(ideal, dtype=np.float64)
    dev = np.abs(A - z)
    util = (W[:, None, :] * dev[None, :, :]).max(axis=2)
    return float(util.min(axis=1).mean())
