"""Dominance relations, normalization, evaluation accounting and the trace model.

Everything here assumes minimization. Objective vectors are plain float64
numpy arrays; a population or trace is a 2-D array with one vector per row.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from stopbench import kernels


class StopbenchError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(StopbenchError, ValueError):
    """Objective vectors of mismatched length."""


class BoundsError(StopbenchError, ValueError):
    """Invalid or degenerate normalization bounds."""


class RangeError(StopbenchError, IndexError):
    """An iteration or index outside the valid range."""


class FormatError(StopbenchError, ValueError):
    """Malformed trace file content. The message names file and line."""


class SequencingError(StopbenchError, ValueError):
    """Snapshots fed to a stopping criterion out of order."""


class ConfigError(StopbenchError, ValueError):
    """Invalid configuration or parameter combination."""


ENCODINGS = ("text", "base64")


def as_vector(values) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError(f"expected a 1-D objective vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("objective vectors must be finite")
    return v


def as_points(points, m: int | None = None) -> np.ndarray:
    """Coerce ``points`` into a C-contiguous ``(n, m)`` float64 array."""
    P = np.asarray(points, dtype=np.float64)
    if P.ndim == 1 and P.size == 0:
        P = P.reshape(0, m or 0)
    if P.ndim != 2:
        raise DimensionError(f"expected a 2-D point array, got shape {P.shape}")
    if m is not None and P.shape[1] != m:
        raise DimensionError(f"expected {m} objectives, got {P.shape[1]}")
    return np.ascontiguousarray(P)


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"length mismatch: {a.shape} vs {b.shape}")
    return a, b


def dominates(a, b) -> bool:
    """True iff ``a`` Pareto-dominates ``b``."""
    a, b = _pair(a, b)
    return bool(np.all(a <= b) and np.any(a < b))


def weakly_dominates(a, b) -> bool:
    """True iff ``a <= b`` componentwise."""
    a, b = _pair(a, b)
    return bool(np.all(a <= b))


def nondominated_subset(points) -> np.ndarray:
    """Members of ``points`` not dominated by any other member.

    Duplicate vectors appear once in the result, in order of first occurrence.
    An empty input gives an empty ``(0, m)`` array.
    """
    P = as_points(points)
    if P.shape[0] == 0:
        return P
    P = P[kernels.nondominated_mask(P)]
    _, first = np.unique(P, axis=0, return_index=True)
    return P[np.sort(first)]


@dataclass(frozen=True)
class NormalizationBounds:
    """Ideal and nadir points used to map objectives onto ``[0, 1]^m``."""

    ideal: np.ndarray
    nadir: np.ndarray

    def __post_init__(self):
        ideal = as_vector(self.ideal)
        nadir = as_vector(self.nadir)
        if ideal.shape != nadir.shape:
            raise DimensionError("ideal and nadir differ in length")
        if not np.all(ideal < nadir):
            raise BoundsError(f"ideal must be strictly below nadir: {ideal} vs {nadir}")
        object.__setattr__(self, "ideal", ideal)
        object.__setattr__(self, "nadir", nadir)

    @property
    def m(self) -> int:
        return self.ideal.shape[0]


def normalize(p, bounds: NormalizationBounds) -> np.ndarray:
    """Affine map of ``p`` (a vector or a row array) with ``ideal -> 0``, ``nadir -> 1``.

    Values beyond the nadir are kept as they are, not clipped.
    """
    p = np.asarray(p, dtype=np.float64)
    if p.shape[-1] != bounds.m:
        raise DimensionError(f"expected {bounds.m} objectives, got {p.shape[-1]}")
    span = bounds.nadir - bounds.ideal
    if np.any(span <= 0):
        raise BoundsError("degenerate normalization bounds")
    return (p - bounds.ideal) / span


def denormalize(q, bounds: NormalizationBounds) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    return q * (bounds.nadir - bounds.ideal) + bounds.ideal


@dataclass(frozen=True)
class RunMeta:
    """Shape and provenance of one optimizer run."""

    m: int
    mu: int
    lam: int
    t_max: int
    problem_id: str = "unknown"
    algorithm_id: str = "unknown"
    seed: int = 0
    encoding: str = "text"

    def __post_init__(self):
        if self.m < 2:
            raise ConfigError(f"m must be >= 2, got {self.m}")
        if self.mu < 2:
            raise ConfigError(f"mu must be >= 2, got {self.mu}")
        if self.lam < 1:
            raise ConfigError(f"lambda must be >= 1, got {self.lam}")
        if self.t_max < 1:
            raise ConfigError(f"t_max must be >= 1, got {self.t_max}")
        if self.seed < 0:
            raise ConfigError("seed must be unsigned")
        if self.encoding not in ENCODINGS:
            raise ConfigError(f"encoding must be one of {ENCODINGS}, got {self.encoding!r}")

    @property
    def fe_max(self) -> int:
        return self.mu + self.lam * (self.t_max - 1)


def fe_of_iteration(meta: RunMeta, t: int) -> int:
    """Number of evaluations spent once iteration ``t`` is complete."""
    if not 1 <= t <= meta.t_max:
        raise RangeError(f"iteration {t} outside [1, {meta.t_max}]")
    return meta.mu + meta.lam * (t - 1)


def iteration_of_fe(meta: RunMeta, fe: int) -> int:
    """Inverse of :func:`fe_of_iteration` for exact evaluation counts."""
    t, rem = divmod(fe - meta.mu, meta.lam)
    if rem or not 0 <= t < meta.t_max:
        raise RangeError(f"{fe} evaluations do not end an iteration of this run")
    return t + 1


@dataclass(frozen=True)
class PopulationSnapshot:
    """Objective vectors of the population at iteration ``iteration`` (1-based)."""

    iteration: int
    members: np.ndarray
    ids: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.iteration < 1:
            raise RangeError("snapshot iteration must be >= 1")
        object.__setattr__(self, "members", as_points(self.members))

    @property
    def mu(self) -> int:
        return self.members.shape[0]


class RunTrace:
    """Every evaluated objective vector plus per-iteration population membership.

    ``points`` holds the ``fe_max`` vectors in evaluation order and
    ``memberships`` the ``t_max`` rows of 1-based indices into it, which is
    the in-memory form of the ``fx``/``id`` file pair. Arrays are made
    read-only on construction.
    """

    def __init__(self, meta: RunMeta, points, memberships):
        self.meta = meta
        P = as_points(points, meta.m)
        ids = np.asarray(memberships, dtype=np.int64)
        if ids.ndim != 2:
            raise DimensionError(f"memberships must be 2-D, got shape {ids.shape}")
        self.points = P
        self.memberships = np.ascontiguousarray(ids)
        self.validate()
        self.points.setflags(write=False)
        self.memberships.setflags(write=False)

    def validate(self):
        meta, P, ids = self.meta, self.points, self.memberships
        if P.shape[0] != meta.fe_max:
            raise ValueError(f"trace holds {P.shape[0]} vectors, expected {meta.fe_max}")
        if not np.all(np.isfinite(P)):
            raise ValueError("trace contains non-finite objective values")
        if ids.shape != (meta.t_max, meta.mu):
            raise ValueError(f"memberships shape {ids.shape}, expected {(meta.t_max, meta.mu)}")
        limits = meta.mu + meta.lam * np.arange(meta.t_max)
        if ids.min() < 1 or np.any(ids.max(axis=1) > limits):
            raise RangeError("membership index outside the evaluated range")

    def snapshot(self, t: int) -> PopulationSnapshot:
        if not 1 <= t <= self.meta.t_max:
            raise RangeError(f"iteration {t} outside [1, {self.meta.t_max}]")
        ids = self.memberships[t - 1]
        return PopulationSnapshot(t, self.points[ids - 1], ids)

    def snapshots(self):
        for t in range(1, self.meta.t_max + 1):
            yield self.snapshot(t)

    def __eq__(self, other):
        if not isinstance(other, RunTrace):
            return NotImplemented
        return (
            self.meta == other.meta
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.memberships, other.memberships)
        )

    def __repr__(self):
        m = self.meta
        return (
            f"RunTrace(problem={m.problem_id!r}, algorithm={m.algorithm_id!r}, seed={m.seed}, "
            f"m={m.m}, mu={m.mu}, lambda={m.lam}, t_max={m.t_max})"
        )
