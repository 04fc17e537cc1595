"""POSE: distance between where a criterion stopped and where it should have.

``FE*`` is the evaluation count at which the best-so-far indicator value was
last updated by more than ``delta``. A criterion that stopped at
``FE_stop`` scores ``|FE* - FE_stop| / FE_max``, multiplied by ``alpha``
when it stopped before ``FE*``. Lower is better; 0 is a perfect stop.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from stopbench.core import ConfigError, RunMeta, fe_of_iteration

DEFAULT_ALPHA = 2.0
DEFAULT_DELTA = 0.0


@dataclass(frozen=True)
class PoseParams:
    alpha: float = DEFAULT_ALPHA
    delta: float = DEFAULT_DELTA
    fe_max: int = 100_000

    def __post_init__(self):
        if not self.alpha >= 1:
            raise ConfigError(f"alpha must be >= 1, got {self.alpha}")
        if not self.delta >= 0:
            raise ConfigError(f"delta must be >= 0, got {self.delta}")
        if self.fe_max <= 0:
            raise ConfigError(f"fe_max must be positive, got {self.fe_max}")


@dataclass(frozen=True)
class PoseResult:
    fe_star: int
    fe_stop: int
    value: float
    params: PoseParams


def last_update_iteration(bhv, delta: float = 0.0) -> int:
    """1-based iteration of the last step where ``bhv`` rose by more than ``delta``.

    Returns 1 when the series never updates after the initial population.
    """
    b = np.asarray(bhv, dtype=np.float64)
    if b.ndim != 1 or b.size == 0:
        raise ValueError("best-so-far series must be a non-empty 1-D sequence")
    steps = np.diff(b)
    if np.any(steps < 0):
        raise ValueError("best-so-far series must be non-decreasing")
    hits = np.flatnonzero(steps > delta)
    return int(hits[-1]) + 2 if hits.size else 1


def fe_star(bhv, meta: RunMeta, delta: float = 0.0) -> int:
    """Evaluations spent when the best-so-far value was last updated."""
    if len(bhv) != meta.t_max:
        raise ValueError(f"series has {len(bhv)} entries, run has t_max={meta.t_max}")
    if delta < 0:
        raise ConfigError("delta must be >= 0")
    return fe_of_iteration(meta, last_update_iteration(bhv, delta))


def pose(fe_star: int, fe_stop: int, params: PoseParams) -> float:
    if not 0 < fe_stop <= params.fe_max:
        raise ValueError(f"fe_stop={fe_stop} outside (0, {params.fe_max}]")
    if not 0 < fe_star <= params.fe_max:
        raise ValueError(f"fe_star={fe_star} outside (0, {params.fe_max}]")
    gap = abs(fe_star - fe_stop) / params.fe_max
    return gap if fe_stop >= fe_star else params.alpha * gap


def score(fe_star_: int, fe_stop: int, params: PoseParams) -> PoseResult:
    return PoseResult(fe_star_, fe_stop, pose(fe_star_, fe_stop, params), params)


def average_ranks(table) -> np.ndarray:
    """Mean rank of each row (criterion) across columns (problems).

    Within each column the smallest value gets rank 1; ties share the mean
    of the tied ranks.
    """
    T = np.asarray(table, dtype=np.float64)
    if T.ndim != 2 or T.size == 0:
        raise ValueError("rank table must be a non-empty 2-D matrix")
    if np.any(np.isnan(T)):
        raise ValueError("rank table has missing cells")
    ranks = np.column_stack([rankdata(T[:, j], method="average") for j in range(T.shape[1])])
    return ranks.mean(axis=1)


def column_ranks(table) -> np.ndarray:
    T = np.asarray(table, dtype=np.float64)
    if np.any(np.isnan(T)):
        raise ValueError("rank table has missing cells")
    return np.column_stack([rankdata(T[:, j], method="average") for j in range(T.shape[1])])


def check_single_setting(settings) -> tuple[float, float]:
    """Refuse to aggregate results computed under different (alpha, delta)."""
    distinct = sorted(set(settings))
    if len(distinct) != 1:
        raise ConfigError(
            f"POSE values are only comparable for one (alpha, delta); found {distinct}"
        )
    return distinct[0]
