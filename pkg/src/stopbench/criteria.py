"""Online stopping criteria replayed over stored population states.

Every criterion is an observer: it is fed ``PopulationSnapshot`` objects in
strictly increasing iteration order (starting at 1) and answers with a
``StopDecision``. Once a criterion stops it keeps returning the same
decision. Criteria work on objectives normalized with the problem's
ideal/nadir bounds; passing ``bounds=None`` uses raw objective values.

Implemented criteria:

* ``ocd``   online convergence detection (chi-square variance test and
  regression slope t-test over a window of indicator values)
* ``mgbm``  Kalman-filtered mutual domination rate
* ``esc``   entropy/grid based dissimilarity of consecutive populations
* ``epssc`` epsilon-progress of an epsilon-box dominance archive
* ``isc``   best-so-far hypervolume patience baseline
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, fields, replace

import numpy as np
from scipy import stats

from stopbench import kernels
from stopbench.core import (
    ConfigError,
    NormalizationBounds,
    PopulationSnapshot,
    RunMeta,
    RunTrace,
    SequencingError,
    as_points,
    fe_of_iteration,
    normalize,
)
from stopbench.indicators import (
    DEFAULT_REF,
    additive_epsilon,
    default_r2_weights,
    r2,
)


@dataclass(frozen=True)
class StopDecision:
    stopped: bool
    stop_iteration: int | None = None
    fe_stop: int | None = None

    def __post_init__(self):
        if self.stopped and (self.stop_iteration is None or self.fe_stop is None):
            raise ValueError("a stopped decision needs both stop fields")


NOT_STOPPED = StopDecision(False)


# ---- parameters ----------------------------------------------------------

@dataclass(frozen=True)
class OcdParams:
    window: int = 13
    var_limit: float = 1e-4
    significance: float = 0.05
    indicators: tuple[str, ...] = ("hv", "epsilon", "r2")

    def __post_init__(self):
        if self.window < 3:
            raise ConfigError("OCD window must be >= 3")
        if self.var_limit <= 0:
            raise ConfigError("OCD var_limit must be positive")
        if not 0 < self.significance < 1:
            raise ConfigError("OCD significance must lie in (0, 1)")
        if isinstance(self.indicators, str):
            object.__setattr__(self, "indicators", tuple(s.strip() for s in self.indicators.split(",")))
        bad = set(self.indicators) - {"hv", "epsilon", "r2"}
        if bad or not self.indicators:
            raise ConfigError(f"OCD indicators must be a non-empty subset of hv, epsilon, r2; got {self.indicators}")


@dataclass(frozen=True)
class MgbmParams:
    i_min: float = 0.12
    r: float = 0.1
    q: float = 1e-5
    x0: float = 1.0
    p0: float = 1.0

    def __post_init__(self):
        if self.i_min < 0 or self.r <= 0 or self.q < 0 or self.p0 <= 0:
            raise ConfigError("MGBM needs i_min >= 0, r > 0, q >= 0, p0 > 0")


@dataclass(frozen=True)
class EscParams:
    n_b: int = 10
    n_s: int = 30
    diss_tol: float = 1e-6
    mode: str = "stable"  # or "threshold": count iterations with D_t <= diss_tol

    def __post_init__(self):
        if self.n_b < 2 or self.n_s < 1 or self.diss_tol < 0:
            raise ConfigError("ESC needs n_b >= 2, n_s >= 1, diss_tol >= 0")
        if self.mode not in ("stable", "threshold"):
            raise ConfigError(f"ESC mode must be 'stable' or 'threshold', got {self.mode!r}")


@dataclass(frozen=True)
class EpsParams:
    epsilon: float = 0.01
    patience: int = 50

    def __post_init__(self):
        if self.epsilon <= 0 or self.patience < 1:
            raise ConfigError("epsilon-progress needs epsilon > 0 and patience >= 1")


@dataclass(frozen=True)
class IscParams:
    patience: int = 50

    def __post_init__(self):
        if self.patience < 1:
            raise ConfigError("ISC patience must be >= 1")


# ---- primitives ----------------------------------------------------------

def mdr(prev, cur) -> float:
    """Mutual domination rate of ``cur`` over ``prev``.

    Fraction of ``prev`` dominated by some member of ``cur`` minus the
    fraction of ``cur`` dominated by some member of ``prev``.
    """
    A = as_points(prev)
    B = as_points(cur)
    if A.shape[0] == 0 or B.shape[0] == 0:
        raise ValueError("MDR needs non-empty populations")
    return kernels.dominated_count(A, B) / A.shape[0] - kernels.dominated_count(B, A) / B.shape[0]


@dataclass(frozen=True)
class KalmanState:
    x: float
    p: float
    q: float
    r: float


def kalman_update(state: KalmanState, z: float) -> KalmanState:
    """One predict/correct step of a scalar random-walk Kalman filter."""
    p_prior = state.p + state.q
    gain = p_prior / (p_prior + state.r)
    x = state.x + gain * (z - state.x)
    return replace(state, x=x, p=(1.0 - gain) * p_prior)


def chi2_variance_rejects(values, var_limit: float, significance: float) -> bool:
    """One-sided chi-square test of ``H0: sigma^2 >= var_limit``.

    Returns True when the sample variance is significantly below the limit.
    """
    v = np.asarray(values, dtype=np.float64)
    dof = v.shape[0] - 1
    stat = dof * v.var(ddof=1) / var_limit
    return bool(stats.chi2.cdf(stat, dof) < significance)


def slope_p_value(values) -> float:
    """Two-sided p-value of the least-squares slope of ``values`` against index."""
    y = np.asarray(values, dtype=np.float64)
    n = y.shape[0]
    x = np.arange(n, dtype=np.float64)
    xc = x - x.mean()
    sxx = float(xc @ xc)
    slope = float(xc @ (y - y.mean())) / sxx
    resid = y - y.mean() - slope * xc
    sse = float(resid @ resid)
    if sse == 0.0:
        return 1.0 if slope == 0.0 else 0.0
    se = np.sqrt(sse / (n - 2) / sxx)
    return float(2.0 * stats.t.sf(abs(slope / se), n - 2))


@dataclass(frozen=True)
class OcdOutcome:
    stop: bool
    variance_stop: bool
    regression_stop: bool


def ocd_step(params: OcdParams, values) -> OcdOutcome:
    """Decide from a ``(window, n_indicators)`` table of indicator values."""
    V = np.asarray(values, dtype=np.float64)
    if V.ndim == 1:
        V = V[:, None]
    if V.shape[0] < params.window:
        raise ValueError("OCD window not yet full")
    V = V[-params.window:]
    var_stop = all(
        chi2_variance_rejects(V[:, j], params.var_limit, params.significance)
        for j in range(V.shape[1])
    )
    reg_stop = all(slope_p_value(V[:, j]) >= params.significance for j in range(V.shape[1]))
    return OcdOutcome(var_stop or reg_stop, var_stop, reg_stop)


def box_index(u, epsilon: float) -> np.ndarray:
    return np.floor(np.asarray(u, dtype=np.float64) / epsilon)


def eps_box_dominates(u, v, epsilon: float) -> bool:
    """Epsilon-box dominance with the corner-distance tie-break inside one box."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    bu, bv = box_index(u, epsilon), box_index(v, epsilon)
    if np.array_equal(bu, bv):
        du = np.linalg.norm(u - epsilon * bu)
        dv = np.linalg.norm(v - epsilon * bv)
        return bool(du < dv)
    return bool(np.all(bu <= bv) and np.any(bu < bv))


class EpsBoxArchive:
    """Archive under epsilon-box dominance, at most one member per box."""

    def __init__(self, epsilon: float, m: int):
        self.epsilon = epsilon
        self.points = np.empty((0, m))
        self.boxes = np.empty((0, m))

    def __len__(self):
        return self.points.shape[0]

    def insert(self, u) -> bool:
        """Offer ``u``; return True when it lands in a previously unoccupied box."""
        u = np.asarray(u, dtype=np.float64)
        bu = box_index(u, self.epsilon)
        B = self.boxes
        if B.shape[0]:
            same = np.all(B == bu, axis=1)
            box_dom = np.all(B <= bu, axis=1) & np.any(B < bu, axis=1)
            if box_dom.any():
                return False
            occupied = bool(same.any())
            if occupied:
                k = int(np.flatnonzero(same)[0])
                du = np.linalg.norm(u - self.epsilon * bu)
                dk = np.linalg.norm(self.points[k] - self.epsilon * B[k])
                if not du < dk:
                    return False
            evict = (np.all(bu <= B, axis=1) & np.any(bu < B, axis=1)) | same
            self.points = self.points[~evict]
            self.boxes = self.boxes[~evict]
        else:
            occupied = False
        self.points = np.vstack([self.points, u])
        self.boxes = np.vstack([self.boxes, bu])
        return not occupied


def cell_distribution(points, n_b: int) -> dict[tuple, float]:
    """Share of ``points`` per grid cell over ``[0, 1]^m``; outliers go to edge cells."""
    P = as_points(points)
    cells = np.clip(np.floor(P * n_b), 0, n_b - 1).astype(np.int64)
    keys, counts = np.unique(cells, axis=0, return_counts=True)
    total = P.shape[0]
    return {tuple(k): c / total for k, c in zip(keys.tolist(), counts.tolist())}


def js_divergence(p: dict, q: dict) -> float:
    """Jensen-Shannon divergence (natural log) of two sparse distributions."""
    total = 0.0
    for key in sorted(set(p) | set(q)):
        a = p.get(key, 0.0)
        b = q.get(key, 0.0)
        # 2a/(a+b) rather than a/mid: mid underflows for subnormal masses
        if a > 0:
            total += 0.5 * a * np.log(2.0 * a / (a + b))
        if b > 0:
            total += 0.5 * b * np.log(2.0 * b / (a + b))
    return float(total)


# ---- observers -------------------------------------------------------------

class StoppingCriterion:
    """Base observer. Subclasses implement ``_update`` returning True to stop."""

    name = "base"
    params_type: type = type(None)

    def __init__(self, meta: RunMeta, bounds: NormalizationBounds | None = None, params=None):
        self.meta = meta
        self.bounds = bounds
        self.params = params if params is not None else self.params_type()
        self._t = 0
        self._decision = NOT_STOPPED

    @property
    def decision(self) -> StopDecision:
        return self._decision

    def _space(self, members):
        if self.bounds is None:
            return members
        return normalize(members, self.bounds)

    def observe(self, snap: PopulationSnapshot) -> StopDecision:
        if snap.iteration != self._t + 1:
            raise SequencingError(
                f"{self.name}: expected iteration {self._t + 1}, got {snap.iteration}"
            )
        self._t = snap.iteration
        if self._decision.stopped:
            return self._decision
        if self._update(snap, self._space(snap.members)):
            self._decision = StopDecision(True, snap.iteration, fe_of_iteration(self.meta, snap.iteration))
        return self._decision

    def _update(self, snap, F) -> bool:
        raise NotImplementedError


def _reference_point(meta, bounds, reference_point):
    if reference_point is not None:
        return np.asarray(reference_point, dtype=np.float64)
    if bounds is None:
        raise ConfigError("raw-space hypervolume needs an explicit reference point")
    return np.full(meta.m, DEFAULT_REF)


class ISC(StoppingCriterion):
    """Stop once the best-so-far hypervolume has not increased for ``patience`` iterations."""

    name = "isc"
    params_type = IscParams

    def __init__(self, meta, bounds=None, params=None, reference_point=None):
        super().__init__(meta, bounds, params)
        self.ref = _reference_point(meta, bounds, reference_point)
        self.best = -np.inf
        self.stale = 0

    def _update(self, snap, F):
        hv = kernels.hypervolume(F, self.ref)
        if snap.iteration == 1:
            self.best = hv
            return False
        if hv > self.best:
            self.best = hv
            self.stale = 0
        else:
            self.stale += 1
        return self.stale >= self.params.patience


class MGBM(StoppingCriterion):
    """Stop once the Kalman estimate of the mutual domination rate drops below ``i_min``."""

    name = "mgbm"
    params_type = MgbmParams

    def __init__(self, meta, bounds=None, params=None):
        super().__init__(meta, bounds, params)
        p = self.params
        self.state = KalmanState(p.x0, p.p0, p.q, p.r)
        self.prev = None

    def _update(self, snap, F):
        prev, self.prev = self.prev, F
        if prev is None:
            return False
        self.state = kalman_update(self.state, mdr(prev, F))
        return self.state.x < self.params.i_min


class OCD(StoppingCriterion):
    """Online convergence detection over a sliding window of indicator values.

    At iteration ``t > window`` the populations ``t-window .. t-1`` are scored
    against ``P^(t)`` as reference set: hypervolume difference, additive
    epsilon, and R2 difference.
    """

    name = "ocd"
    params_type = OcdParams

    def __init__(self, meta, bounds=None, params=None, reference_point=None, r2_weights=None):
        super().__init__(meta, bounds, params)
        self.ref = _reference_point(meta, bounds, reference_point) if "hv" in self.params.indicators else None
        self.weights = r2_weights if r2_weights is not None else default_r2_weights(meta.m, meta.mu)
        self.window = deque(maxlen=self.params.window)
        self.last = None

    def _unary(self, F):
        out = {}
        if "hv" in self.params.indicators:
            out["hv"] = kernels.hypervolume(F, self.ref)
        if "r2" in self.params.indicators:
            out["r2"] = r2(F, self.weights)
        return out

    def indicator_values(self, ref_F, ref_unary):
        rows = []
        for F, unary in self.window:
            row = []
            for name in self.params.indicators:
                if name == "hv":
                    row.append(ref_unary["hv"] - unary["hv"])
                elif name == "epsilon":
                    row.append(additive_epsilon(F, ref_F))
                else:
                    row.append(unary["r2"] - ref_unary["r2"])
            rows.append(row)
        return np.asarray(rows)

    def _update(self, snap, F):
        unary = self._unary(F)
        stop = False
        if len(self.window) == self.params.window:
            self.last = ocd_step(self.params, self.indicator_values(F, unary))
            stop = self.last.stop
        self.window.append((F, unary))
        return stop


class ESC(StoppingCriterion):
    """Stop once the grid dissimilarity of consecutive populations stays put for ``n_s`` iterations."""

    name = "esc"
    params_type = EscParams

    def __init__(self, meta, bounds=None, params=None):
        super().__init__(meta, bounds, params)
        self.prev_dist = None
        self.prev_d = None
        self.count = 0

    def _update(self, snap, F):
        dist = cell_distribution(F, self.params.n_b)
        prev, self.prev_dist = self.prev_dist, dist
        if prev is None:
            return False
        d = js_divergence(prev, dist)
        if self.params.mode == "threshold":
            hit = d <= self.params.diss_tol
        else:
            hit = self.prev_d is not None and abs(d - self.prev_d) <= self.params.diss_tol
        self.prev_d = d
        self.count = self.count + 1 if hit else 0
        return self.count >= self.params.n_s


class EpsilonProgress(StoppingCriterion):
    """Stop once the epsilon-progress counter is unchanged for ``patience`` iterations.

    New points of an iteration are the members that were not in the
    previous population (by id when the snapshot carries ids, otherwise by
    value).
    """

    name = "epssc"
    params_type = EpsParams

    def __init__(self, meta, bounds=None, params=None):
        super().__init__(meta, bounds, params)
        self.archive = EpsBoxArchive(self.params.epsilon, meta.m)
        self.progress = 0
        self.stale = 0
        self.prev_ids = None
        self.prev_rows = None

    def _new_rows(self, snap, F):
        if snap.ids is not None:
            ids = snap.ids
            if self.prev_ids is None:
                fresh = np.ones(ids.shape[0], dtype=bool)
            else:
                fresh = ~np.isin(ids, self.prev_ids)
            self.prev_ids = np.asarray(ids)
            return F[fresh]
        if self.prev_rows is None:
            self.prev_rows = F
            return F
        seen = {}
        for row in map(tuple, self.prev_rows.tolist()):
            seen[row] = seen.get(row, 0) + 1
        keep = []
        for row in map(tuple, F.tolist()):
            if seen.get(row, 0):
                seen[row] -= 1
                keep.append(False)
            else:
                keep.append(True)
        self.prev_rows = F
        return F[np.asarray(keep, dtype=bool)]

    def _update(self, snap, F):
        before = self.progress
        for u in self._new_rows(snap, F):
            if self.archive.insert(u):
                self.progress += 1
        if snap.iteration == 1:
            return False
        self.stale = 0 if self.progress != before else self.stale + 1
        return self.stale >= self.params.patience


CRITERIA = {cls.name: cls for cls in (OCD, MGBM, ESC, EpsilonProgress, ISC)}
CRITERION_ORDER = ("ocd", "mgbm", "esc", "epssc", "isc")


def params_from_mapping(name: str, values: dict):
    """Build the parameter dataclass of criterion ``name`` from string values."""
    try:
        cls = CRITERIA[name].params_type
    except KeyError:
        raise ConfigError(f"unknown criterion {name!r}; known: {', '.join(CRITERION_ORDER)}") from None
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, raw in values.items():
        if key not in known:
            raise ConfigError(f"{name}: unknown parameter {key!r}")
        default = known[key].default
        try:
            if isinstance(default, bool):
                kwargs[key] = str(raw).lower() in ("1", "true", "yes")
            elif isinstance(default, int):
                kwargs[key] = int(raw)
            elif isinstance(default, float):
                kwargs[key] = float(raw)
            elif isinstance(default, tuple):
                kwargs[key] = tuple(s.strip() for s in str(raw).split(",") if s.strip())
            else:
                kwargs[key] = raw
        except ValueError:
            raise ConfigError(f"{name}: bad value {raw!r} for {key}") from None
    return cls(**kwargs)


def make_criterion(name: str, meta: RunMeta, bounds=None, params=None) -> StoppingCriterion:
    try:
        cls = CRITERIA[name]
    except KeyError:
        raise ConfigError(f"unknown criterion {name!r}; known: {', '.join(CRITERION_ORDER)}") from None
    return cls(meta, bounds, params)


def replay(trace: RunTrace, criteria: dict[str, StoppingCriterion]) -> dict[str, StopDecision]:
    """Feed every snapshot of ``trace`` to each criterion until all have stopped."""
    active = dict(criteria)
    for snap in trace.snapshots():
        for key in list(active):
            if active[key].observe(snap).stopped:
                del active[key]
        if not active:
            break
    return {key: crit.decision for key, crit in criteria.items()}
