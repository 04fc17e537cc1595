"""NSGA-II trace generator (generational and steady-state).

Runs the usual mating selection / variation / environmental selection loop
until the evaluation budget is spent and records every evaluated objective
vector plus the surviving population of each iteration. No stopping
criterion is applied here; criteria are replayed over the stored trace.

Randomness comes from numpy's ``Generator(PCG64(seed))``. PCG64 is a fixed,
documented algorithm, so a given seed reproduces the same trace on any
platform with the same numpy major version.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from stopbench import kernels
from stopbench.core import ConfigError, RunMeta, RunTrace
from stopbench.problems import ProblemSpec, evaluate


@dataclass(frozen=True)
class EvolverConfig:
    mu: int = 100
    lam: int | None = None
    fe_max: int = 100_000
    seed: int = 0
    sbx_eta: float = 20.0
    sbx_prob: float = 0.9
    pm_eta: float = 20.0
    pm_prob: float | None = None  # None means 1/n
    algorithm_id: str = "nsga2"
    encoding: str = "text"

    def __post_init__(self):
        if self.lam is None:
            object.__setattr__(self, "lam", self.mu)
        if self.mu < 2:
            raise ConfigError(f"mu must be >= 2, got {self.mu}")
        if not 1 <= self.lam <= self.mu:
            raise ConfigError(f"lambda must be in [1, mu], got {self.lam}")
        if self.fe_max < self.mu:
            raise ConfigError(f"fe_max must be >= mu, got {self.fe_max}")
        if self.seed < 0:
            raise ConfigError("seed must be unsigned")
        if not 0.0 <= self.sbx_prob <= 1.0:
            raise ConfigError("sbx_prob must be a probability")
        if self.pm_prob is not None and not 0.0 <= self.pm_prob <= 1.0:
            raise ConfigError("pm_prob must be a probability")

    @property
    def t_max(self) -> int:
        return 1 + (self.fe_max - self.mu) // self.lam


def rank_and_crowding(F):
    """Non-domination rank and per-front crowding distance of each row."""
    ranks = kernels.nondominated_sort(F)
    crowd = np.empty(F.shape[0])
    for r in range(int(ranks.max()) + 1 if len(ranks) else 0):
        idx = np.flatnonzero(ranks == r)
        crowd[idx] = kernels.crowding_distance(F[idx])
    return ranks, crowd


def environmental_select(F, mu, eval_index=None):
    """Pick ``mu`` survivors from the rows of ``F`` (parents plus offspring).

    Whole fronts are taken in rank order; the front that does not fit is
    truncated by keeping the largest crowding distances, with remaining ties
    going to the lower evaluation index. Returns the selected row positions
    in ascending order together with their ranks and crowding distances,
    where crowding is computed on the last front before truncation.
    """
    F = np.asarray(F, dtype=np.float64)
    n = F.shape[0]
    if eval_index is None:
        eval_index = np.arange(n)
    if mu >= n:
        ranks, crowd = rank_and_crowding(F)
        return np.arange(n), ranks, crowd
    ranks = kernels.nondominated_sort(F)
    crowd = np.zeros(n)
    chosen = []
    r = 0
    while len(chosen) < mu:
        front = np.flatnonzero(ranks == r)
        crowd[front] = kernels.crowding_distance(F[front])
        room = mu - len(chosen)
        if front.size <= room:
            chosen.extend(front.tolist())
        else:
            # larger crowding first, then earlier evaluation
            order = np.lexsort((eval_index[front], -crowd[front]))
            chosen.extend(front[order[:room]].tolist())
        r += 1
    sel = np.sort(np.asarray(chosen, dtype=np.int64))
    return sel, ranks[sel], crowd[sel]


def _tournament(rng, ranks, crowd, n_select):
    mu = ranks.shape[0]
    a = rng.integers(0, mu, size=n_select)
    b = rng.integers(0, mu, size=n_select)
    a_wins = (ranks[a] < ranks[b]) | ((ranks[a] == ranks[b]) & (crowd[a] >= crowd[b]))
    return np.where(a_wins, a, b)


def sbx(rng, p1, p2, eta, prob):
    """Simulated binary crossover on ``[0, 1]`` bounded variables (Deb & Agrawal)."""
    c1, c2 = p1.copy(), p2.copy()
    n = p1.shape[0]
    if rng.random() > prob:
        return c1, c2
    swap_mask = rng.random(n) <= 0.5
    u_all = rng.random(n)
    for i in range(n):
        if not swap_mask[i]:
            continue
        x1, x2 = p1[i], p2[i]
        if abs(x1 - x2) <= 1e-14:
            continue
        y1, y2 = (x1, x2) if x1 < x2 else (x2, x1)
        u = u_all[i]
        dy = y2 - y1
        beta = 1.0 + 2.0 * y1 / dy
        alpha = 2.0 - beta ** -(eta + 1.0)
        betaq = _betaq(u, alpha, eta)
        ch1 = 0.5 * ((y1 + y2) - betaq * dy)
        beta = 1.0 + 2.0 * (1.0 - y2) / dy
        alpha = 2.0 - beta ** -(eta + 1.0)
        betaq = _betaq(u, alpha, eta)
        ch2 = 0.5 * ((y1 + y2) + betaq * dy)
        ch1 = min(max(ch1, 0.0), 1.0)
        ch2 = min(max(ch2, 0.0), 1.0)
        if x1 > x2:
            ch1, ch2 = ch2, ch1
        c1[i], c2[i] = ch1, ch2
    return c1, c2


def _betaq(u, alpha, eta):
    if u <= 1.0 / alpha:
        return (u * alpha) ** (1.0 / (eta + 1.0))
    return (1.0 / (2.0 - u * alpha)) ** (1.0 / (eta + 1.0))


def polynomial_mutation(rng, x, eta, prob):
    """Bounded polynomial mutation on ``[0, 1]`` variables."""
    y = x.copy()
    n = x.shape[0]
    hit = rng.random(n) < prob
    u_all = rng.random(n)
    mpow = 1.0 / (eta + 1.0)
    for i in np.flatnonzero(hit):
        v = y[i]
        d1, d2 = v, 1.0 - v
        u = u_all[i]
        if u < 0.5:
            xy = 1.0 - d1
            val = 2.0 * u + (1.0 - 2.0 * u) * xy ** (eta + 1.0)
            dq = val ** mpow - 1.0
        else:
            xy = 1.0 - d2
            val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * xy ** (eta + 1.0)
            dq = 1.0 - val ** mpow
        y[i] = min(max(v + dq, 0.0), 1.0)
    return y


def _variation(rng, X, parents, lam, cfg, pm_prob):
    kids = []
    for k in range(0, 2 * ((lam + 1) // 2), 2):
        c1, c2 = sbx(rng, X[parents[k]], X[parents[k + 1]], cfg.sbx_eta, cfg.sbx_prob)
        kids.append(polynomial_mutation(rng, c1, cfg.pm_eta, pm_prob))
        kids.append(polynomial_mutation(rng, c2, cfg.pm_eta, pm_prob))
    return np.asarray(kids[:lam])


def run(spec: ProblemSpec, cfg: EvolverConfig) -> RunTrace:
    """Run NSGA-II on ``spec`` and return the full trace.

    With ``lam == mu`` this is the generational algorithm; with ``lam == 1``
    it is the steady-state variant that drops the least crowded member of
    the last front. Survivors keep their slot in the membership row and
    incoming offspring fill the vacated slots in evaluation order.
    """
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    mu, lam, t_max = cfg.mu, cfg.lam, cfg.t_max
    pm_prob = cfg.pm_prob if cfg.pm_prob is not None else 1.0 / spec.n
    fe_max = mu + lam * (t_max - 1)

    points = np.empty((fe_max, spec.m))
    members = np.empty((t_max, mu), dtype=np.int64)

    X = rng.random((mu, spec.n))
    F = evaluate(spec, X)
    points[:mu] = F
    slots = np.arange(1, mu + 1, dtype=np.int64)  # 1-based ids per slot
    members[0] = slots
    ranks, crowd = rank_and_crowding(F)
    n_eval = mu

    for t in range(1, t_max):
        parents = _tournament(rng, ranks, crowd, 2 * ((lam + 1) // 2))
        Xq = _variation(rng, X, parents, lam, cfg, pm_prob)
        Fq = evaluate(spec, Xq)
        points[n_eval:n_eval + lam] = Fq
        q_ids = np.arange(n_eval + 1, n_eval + lam + 1, dtype=np.int64)
        n_eval += lam

        FU = np.vstack([F, Fq])
        XU = np.vstack([X, Xq])
        ids_u = np.concatenate([slots, q_ids])
        sel, sel_ranks, sel_crowd = environmental_select(FU, mu, ids_u)

        keep_parent = sel[sel < mu]
        new_kids = sel[sel >= mu]
        new_slots = slots.copy()
        new_X = X.copy()
        new_F = F.copy()
        new_ranks = np.empty(mu, dtype=np.int64)
        new_crowd = np.empty(mu)
        pos = {int(s): k for k, s in enumerate(sel)}
        for p in keep_parent:
            new_ranks[p] = sel_ranks[pos[int(p)]]
            new_crowd[p] = sel_crowd[pos[int(p)]]
        vacated = np.setdiff1d(np.arange(mu), keep_parent)
        for slot, kid in zip(vacated, new_kids):
            new_slots[slot] = ids_u[kid]
            new_X[slot] = XU[kid]
            new_F[slot] = FU[kid]
            new_ranks[slot] = sel_ranks[pos[int(kid)]]
            new_crowd[slot] = sel_crowd[pos[int(kid)]]
        slots, X, F, ranks, crowd = new_slots, new_X, new_F, new_ranks, new_crowd
        members[t] = slots

    meta = RunMeta(
        m=spec.m,
        mu=mu,
        lam=lam,
        t_max=t_max,
        problem_id=spec.problem_id,
        algorithm_id=cfg.algorithm_id,
        seed=cfg.seed,
        encoding=cfg.encoding,
    )
    return RunTrace(meta, points, members)
