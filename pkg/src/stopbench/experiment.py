"""Batch pipeline: generate archives, replay criteria, score with POSE, rank.

Layout of an output directory::

    archives/<problem>_m<m>/<algorithm>/seed<k>/   compact traces
    decisions.csv                                  one row per archive x criterion
    results.csv                                    FE*, FE_stop and POSE per decision
    averages.csv                                   mean POSE per instance x criterion
    plotdata/<problem>_m<m>__<algorithm>__seed<k>.csv   t, fe, hv, bhv series
    plotdata/markers.csv                           FE* and FE_stop per decision
    rankings.csv                                   average ranks at one (alpha, delta)
    rankings_alpha_<v>.csv, rankings_delta_<v>.csv sweep tables

Every table starts with one ``#`` provenance line carrying the tool version
and the configuration hash, followed by a single header row.
"""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from stopbench import __version__
from stopbench.config import ExperimentConfig
from stopbench.core import FormatError, RunMeta
from stopbench.criteria import make_criterion, replay
from stopbench.indicators import HvConfig, best_so_far, hv_series
from stopbench.optimizer import run
from stopbench.pose import (
    PoseParams,
    average_ranks,
    check_single_setting,
    column_ranks,
    last_update_iteration,
    pose,
)
from stopbench.problems import ProblemSpec, reference_bounds
from stopbench.traceio import TraceArchive, read_compact, write_compact

ARCHIVE_DIR = "archives"
PLOT_DIR = "plotdata"
DECISIONS_NAME = "decisions.csv"
RESULTS_NAME = "results.csv"
AVERAGES_NAME = "averages.csv"
RANKINGS_NAME = "rankings.csv"
MARKERS_NAME = "markers.csv"
NOT_STOPPED_MARK = "NA"

DECISION_FIELDS = ("archive", "problem", "m", "algorithm", "seed", "criterion",
                   "stopped", "stop_iteration", "fe_stop")
RESULT_FIELDS = ("archive", "problem", "m", "algorithm", "seed", "criterion",
                 "fe_max", "fe_star", "fe_stop", "stopped", "alpha", "delta", "pose")
AVERAGE_FIELDS = ("problem", "m", "algorithm", "criterion", "runs", "alpha", "delta", "mean_pose")


# ---- table io ---------------------------------------------------------------

def provenance(cfg: ExperimentConfig) -> str:
    return f"tool=stopbench version={__version__} config={cfg.digest}"


def write_table(path: Path, header, rows, cfg: ExperimentConfig) -> Path:
    buf = io.StringIO()
    buf.write(f"# {provenance(cfg)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def read_table(path: Path) -> list[dict]:
    """Rows of a table written by :func:`write_table`, as string dicts."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"{path}: cannot read ({exc.strerror})") from None
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    if not lines:
        raise FormatError(f"{path}: no header row")
    return list(csv.DictReader(lines))


def _fmt(x: float) -> str:
    return repr(float(x))


# ---- archive enumeration --------------------------------------------------

@dataclass(frozen=True)
class RunKey:
    problem: str
    m: int
    algorithm: str
    seed: int

    @property
    def relpath(self) -> str:
        return f"{self.problem}_m{self.m}/{self.algorithm}/seed{self.seed}"

    @property
    def instance(self) -> str:
        return f"{self.problem}_m{self.m}/{self.algorithm}"

    @property
    def stem(self) -> str:
        return f"{self.problem}_m{self.m}__{self.algorithm}__seed{self.seed}"


def run_keys(cfg: ExperimentConfig) -> list[tuple[RunKey, ProblemSpec, object]]:
    out = []
    for spec in cfg.problems:
        for alg in cfg.algorithms:
            for seed in cfg.seeds:
                out.append((RunKey(spec.problem_id, spec.m, alg.algorithm_id, seed), spec, alg))
    return out


def archive_root(out: Path) -> Path:
    return Path(out) / ARCHIVE_DIR


def _pool_map(fn, items, jobs: int):
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# ---- generate ---------------------------------------------------------------

def _generate_one(task):
    key, spec, alg, directory, comment = task
    trace = run(spec, replace(alg, seed=key.seed))
    write_compact(trace, directory, comment=comment)
    return directory


def generate(cfg: ExperimentConfig, out: Path, jobs: int = 1) -> list[Path]:
    """Run every problem x algorithm x seed and store the compact traces."""
    root = archive_root(out)
    tasks = [(k, s, a, root / k.relpath, provenance(cfg)) for k, s, a in run_keys(cfg)]
    return _pool_map(_generate_one, tasks, jobs)


# ---- replay -----------------------------------------------------------------

@lru_cache(maxsize=4)
def _load(directory: str):
    return read_compact(TraceArchive(Path(directory)))


def _bounds_for(meta: RunMeta):
    return reference_bounds(ProblemSpec(meta.problem_id, meta.m))


def _replay_one(task):
    directory, kind, params = task
    trace = _load(directory)
    crit = make_criterion(kind, trace.meta, _bounds_for(trace.meta), params)
    return replay(trace, {kind: crit})[kind]


def discover(cfg: ExperimentConfig, out: Path) -> list[Path]:
    """Archive directories implied by the configuration; all must exist."""
    root = archive_root(out)
    paths = [root / k.relpath for k, _, _ in run_keys(cfg)]
    missing = [p for p in paths if not p.is_dir()]
    if missing:
        raise FormatError(f"{missing[0]}: archive missing; run generate first")
    return paths


def _archive_label(path: Path, out: Path) -> str:
    try:
        return Path(path).resolve().relative_to(archive_root(out).resolve()).as_posix()
    except ValueError:
        return Path(path).as_posix()


def replay_archives(cfg: ExperimentConfig, out: Path, archives=None, jobs: int = 1) -> Path:
    """Replay every configured criterion over each archive; write decisions."""
    _load.cache_clear()
    paths = [Path(p) for p in archives] if archives else discover(cfg, out)
    metas = [_load(str(p)).meta for p in paths]
    tasks = [(str(p), c.kind, c.params) for p in paths for c in cfg.criteria]
    decisions = _pool_map(_replay_one, tasks, jobs)
    rows = []
    it = iter(decisions)
    for path, meta in zip(paths, metas):
        for c in cfg.criteria:
            d = next(it)
            rows.append((
                _archive_label(path, out), meta.problem_id, meta.m, meta.algorithm_id, meta.seed,
                c.label, int(d.stopped),
                d.stop_iteration if d.stopped else NOT_STOPPED_MARK,
                d.fe_stop if d.stopped else NOT_STOPPED_MARK,
            ))
    return write_table(Path(out) / DECISIONS_NAME, DECISION_FIELDS, rows, cfg)


# ---- evaluate ---------------------------------------------------------------

def _series_one(directory: str):
    trace = _load(directory)
    hv = hv_series(trace, HvConfig(_bounds_for(trace.meta)))
    return trace.meta, hv


def write_series(path: Path, meta: RunMeta, hv, cfg: ExperimentConfig) -> Path:
    bhv = best_so_far(hv)
    fe = [meta.mu + meta.lam * t for t in range(meta.t_max)]
    rows = [(t + 1, fe[t], _fmt(hv[t]), _fmt(bhv[t])) for t in range(meta.t_max)]
    return write_table(path, ("t", "fe", "hv", "bhv"), rows, cfg)


def read_series(path: Path) -> tuple[np.ndarray, np.ndarray]:
    """``(fe, bhv)`` columns of a plot-data series file."""
    rows = read_table(path)
    try:
        return (np.array([int(r["fe"]) for r in rows]),
                np.array([float(r["bhv"]) for r in rows]))
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: bad series ({exc})") from None


def fe_star_from_series(fe, bhv, delta: float) -> int:
    return int(fe[last_update_iteration(bhv, delta) - 1])


def _aggregate(rows: list[dict]) -> list[tuple]:
    """Mean POSE per (problem, m, algorithm, criterion), first-seen order."""
    check_single_setting((float(r["alpha"]), float(r["delta"])) for r in rows)
    groups = defaultdict(list)
    for r in rows:
        groups[(r["problem"], int(r["m"]), r["algorithm"], r["criterion"])].append(float(r["pose"]))
    alpha, delta = float(rows[0]["alpha"]), float(rows[0]["delta"])
    return [(*k, len(v), _fmt(alpha), _fmt(delta), _fmt(float(np.mean(v)))) for k, v in groups.items()]


def evaluate(cfg: ExperimentConfig, out: Path, jobs: int = 1) -> Path:
    """Score each decision with POSE and write results, averages and series."""
    _load.cache_clear()
    out = Path(out)
    decisions = read_table(out / DECISIONS_NAME)
    by_archive = defaultdict(dict)
    for d in decisions:
        by_archive[d["archive"]][d["criterion"]] = d
    labels = [c.label for c in cfg.criteria]
    for arch, found in by_archive.items():
        missing = [lab for lab in labels if lab not in found]
        if missing:
            raise FormatError(f"{out / DECISIONS_NAME}: no decision for {arch} / {missing[0]}")
    if not by_archive:
        raise FormatError(f"{out / DECISIONS_NAME}: no decisions")

    root = archive_root(out)
    archives = list(by_archive)
    dirs = [str(root / a) if (root / a).is_dir() else a for a in archives]
    series = _pool_map(_series_one, dirs, jobs)

    results = []
    markers = []
    for arch, (meta, hv) in zip(archives, series):
        key = RunKey(meta.problem_id, meta.m, meta.algorithm_id, meta.seed)
        write_series(out / PLOT_DIR / f"{key.stem}.csv", meta, hv, cfg)
        params = PoseParams(cfg.alpha, cfg.delta, meta.fe_max)
        fstar = fe_star_from_series([meta.mu + meta.lam * t for t in range(meta.t_max)],
                                    best_so_far(hv), cfg.delta)
        for lab in labels:
            d = by_archive[arch][lab]
            stopped = d["stopped"] == "1"
            fstop = int(d["fe_stop"]) if stopped else meta.fe_max
            results.append({
                "archive": arch, "problem": meta.problem_id, "m": meta.m,
                "algorithm": meta.algorithm_id, "seed": meta.seed, "criterion": lab,
                "fe_max": meta.fe_max, "fe_star": fstar, "fe_stop": fstop,
                "stopped": int(stopped), "alpha": _fmt(cfg.alpha), "delta": _fmt(cfg.delta),
                "pose": _fmt(pose(fstar, fstop, params)),
            })
            markers.append((arch, lab, fstar, fstop))

    write_table(out / RESULTS_NAME, RESULT_FIELDS,
                [[r[f] for f in RESULT_FIELDS] for r in results], cfg)
    write_table(out / PLOT_DIR / MARKERS_NAME, ("archive", "criterion", "fe_star", "fe_stop"),
                markers, cfg)
    write_table(out / AVERAGES_NAME, AVERAGE_FIELDS,
                _aggregate([{k: str(v) for k, v in r.items()} for r in results]), cfg)
    return out / RESULTS_NAME


# ---- report -----------------------------------------------------------------

@dataclass(frozen=True)
class RankTable:
    criteria: list[str]
    instances: list[str]
    mean_pose: np.ndarray      # criteria x instances
    ranks: np.ndarray          # criteria x instances
    average: np.ndarray        # per criterion

    def rows(self):
        for i, c in enumerate(self.criteria):
            yield (c, *(_fmt(v) for v in self.ranks[i]), _fmt(self.average[i]))

    @property
    def header(self):
        return ("criterion", *self.instances, "mean_rank")


def rank_table(rows: list[dict]) -> RankTable:
    """Average-rank table from result rows computed under one (alpha, delta)."""
    if not rows:
        raise FormatError("no result rows to rank")
    check_single_setting((float(r["alpha"]), float(r["delta"])) for r in rows)
    crits = list(dict.fromkeys(r["criterion"] for r in rows))
    insts = list(dict.fromkeys(f"{r['problem']}_m{r['m']}/{r['algorithm']}" for r in rows))
    sums = np.zeros((len(crits), len(insts)))
    counts = np.zeros_like(sums)
    for r in rows:
        i = crits.index(r["criterion"])
        j = insts.index(f"{r['problem']}_m{r['m']}/{r['algorithm']}")
        sums[i, j] += float(r["pose"])
        counts[i, j] += 1
    if np.any(counts == 0):
        raise FormatError("results do not cover every criterion on every instance")
    mean = sums / counts
    ranks = column_ranks(mean)
    return RankTable(crits, insts, mean, ranks, average_ranks(mean))


def _rescore(rows, alpha: float, delta: float, out: Path) -> list[dict]:
    """Recompute POSE for result rows under another (alpha, delta)."""
    cache = {}
    new = []
    for r in rows:
        fe_max = int(r["fe_max"])
        fstar = int(r["fe_star"])
        if delta != float(r["delta"]):
            key = RunKey(r["problem"], int(r["m"]), r["algorithm"], int(r["seed"]))
            if key not in cache:
                cache[key] = fe_star_from_series(*read_series(out / PLOT_DIR / f"{key.stem}.csv"), delta)
            fstar = cache[key]
        value = pose(fstar, int(r["fe_stop"]), PoseParams(alpha, delta, fe_max))
        new.append({**r, "fe_star": str(fstar), "alpha": _fmt(alpha),
                    "delta": _fmt(delta), "pose": _fmt(value)})
    return new


def sweep_name(param: str, value: float) -> str:
    return f"rankings_{param}_{value:g}.csv"


def report(cfg: ExperimentConfig, out: Path, alpha_sweep=(), delta_sweep=()) -> list[Path]:
    """Write the rank table and any sweep tables; return the written paths."""
    out = Path(out)
    rows = read_table(out / RESULTS_NAME)
    table = rank_table(rows)
    written = [write_table(out / RANKINGS_NAME, table.header, table.rows(), cfg)]
    alpha0, delta0 = float(rows[0]["alpha"]), float(rows[0]["delta"])
    for param, values in (("alpha", alpha_sweep), ("delta", delta_sweep)):
        for v in values:
            a, d = (v, delta0) if param == "alpha" else (alpha0, v)
            t = rank_table(_rescore(rows, a, d, out))
            written.append(write_table(out / sweep_name(param, v), t.header, t.rows(), cfg))
    return written
