"""DTLZ1-DTLZ7 and convex DTLZ2 test problems.

All problems are box-constrained to ``[0, 1]^n`` with ``n = m + k - 1``.
Default ``k`` follows the usual DTLZ settings: 5 for DTLZ1, 10 for
DTLZ2-DTLZ6 and CDTLZ2, 20 for DTLZ7.

References:
    Deb, K., Thiele, L., Laumanns, M., Zitzler, E. (2002). Scalable
    multi-objective optimization test problems. CEC 2002.
    Deb, K., Jain, H. (2014). An evolutionary many-objective optimization
    algorithm using reference-point-based nondominated sorting approach,
    part I. IEEE TEVC 18(4). (convex DTLZ2)
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

from stopbench.core import BoundsError, ConfigError, NormalizationBounds

PROBLEM_IDS = ("dtlz1", "dtlz2", "dtlz3", "dtlz4", "dtlz5", "dtlz6", "dtlz7", "cdtlz2")
DEFAULT_K = {
    "dtlz1": 5,
    "dtlz2": 10,
    "dtlz3": 10,
    "dtlz4": 10,
    "dtlz5": 10,
    "dtlz6": 10,
    "dtlz7": 20,
    "cdtlz2": 10,
}
DTLZ4_ALPHA = 100.0
BOUNDS_FILE = "bounds.csv"


class UnknownProblemError(ConfigError, LookupError):
    pass


class DomainError(ValueError):
    """Decision vector outside the box bounds."""


@dataclass(frozen=True)
class ProblemSpec:
    problem_id: str
    m: int
    n: int | None = None

    def __post_init__(self):
        pid = self.problem_id.lower()
        if pid not in PROBLEM_IDS:
            raise UnknownProblemError(f"unknown problem {self.problem_id!r}")
        object.__setattr__(self, "problem_id", pid)
        if self.m < 2:
            raise ConfigError(f"m must be >= 2, got {self.m}")
        if self.n is None:
            object.__setattr__(self, "n", self.m + DEFAULT_K[pid] - 1)
        if self.n < self.m:
            raise ConfigError(f"n must be >= m, got n={self.n}, m={self.m}")

    @property
    def k(self) -> int:
        return self.n - self.m + 1

    @property
    def key(self) -> str:
        return f"{self.problem_id}_m{self.m}"


def _g_multimodal(xm):
    k = xm.shape[-1]
    z = xm - 0.5
    return 100.0 * (k + np.sum(z * z - np.cos(20.0 * np.pi * z), axis=-1))


def _g_sphere(xm):
    z = xm - 0.5
    return np.sum(z * z, axis=-1)


def _spherical(theta, g, m):
    """Map angles ``theta`` (..., m-1) to the radius ``1+g`` sphere front."""
    shape = theta.shape[:-1] + (m,)
    f = np.empty(shape)
    c = np.cos(theta)
    s = np.sin(theta)
    r = 1.0 + g
    for i in range(m):
        v = r * np.prod(c[..., : m - 1 - i], axis=-1)
        if i > 0:
            v = v * s[..., m - 1 - i]
        f[..., i] = v
    return f


def _dtlz1(x, m):
    xm = x[..., m - 1:]
    g = _g_multimodal(xm)
    f = np.empty(x.shape[:-1] + (m,))
    for i in range(m):
        v = 0.5 * (1.0 + g) * np.prod(x[..., : m - 1 - i], axis=-1)
        if i > 0:
            v = v * (1.0 - x[..., m - 1 - i])
        f[..., i] = v
    return f


def _dtlz2_like(x, m, g, alpha=1.0):
    theta = 0.5 * np.pi * x[..., : m - 1] ** alpha
    return _spherical(theta, g, m)


def _dtlz5_like(x, m, g):
    gg = g[..., None]
    theta = np.pi / (4.0 * (1.0 + gg)) * (1.0 + 2.0 * gg * x[..., : m - 1])
    theta[..., 0] = 0.5 * np.pi * x[..., 0]
    return _spherical(theta, g, m)


def _dtlz7(x, m):
    xm = x[..., m - 1:]
    k = xm.shape[-1]
    g = 1.0 + 9.0 / k * np.sum(xm, axis=-1)
    f = np.empty(x.shape[:-1] + (m,))
    f[..., : m - 1] = x[..., : m - 1]
    fi = f[..., : m - 1]
    h = m - np.sum(fi / (1.0 + g[..., None]) * (1.0 + np.sin(3.0 * np.pi * fi)), axis=-1)
    f[..., m - 1] = (1.0 + g) * h
    return f


def evaluate(spec: ProblemSpec, x) -> np.ndarray:
    """Objective vector(s) of ``x``; accepts one decision vector or a row batch."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != spec.n:
        raise DomainError(f"{spec.problem_id} expects {spec.n} variables, got {x.shape[-1]}")
    if np.any(~np.isfinite(x)) or np.any(x < 0.0) or np.any(x > 1.0):
        raise DomainError("decision variables must lie in [0, 1]")
    m, pid = spec.m, spec.problem_id
    xm = x[..., m - 1:]
    if pid == "dtlz1":
        return _dtlz1(x, m)
    if pid == "dtlz2":
        return _dtlz2_like(x, m, _g_sphere(xm))
    if pid == "dtlz3":
        return _dtlz2_like(x, m, _g_multimodal(xm))
    if pid == "dtlz4":
        return _dtlz2_like(x, m, _g_sphere(xm), DTLZ4_ALPHA)
    if pid == "dtlz5":
        return _dtlz5_like(x, m, _g_sphere(xm))
    if pid == "dtlz6":
        return _dtlz5_like(x, m, np.sum(xm ** 0.1, axis=-1))
    if pid == "dtlz7":
        return _dtlz7(x, m)
    # cdtlz2
    f = _dtlz2_like(x, m, _g_sphere(xm))
    f[..., : m - 1] = f[..., : m - 1] ** 4
    f[..., m - 1] = f[..., m - 1] ** 2
    return f


def parse_bounds_line(line: str) -> tuple[str, int, NormalizationBounds]:
    fields = line.strip().split(",")
    pid, m = fields[0], int(fields[1])
    values = [float(v) for v in fields[2:]]
    if len(values) != 2 * m:
        raise ValueError(f"expected {2 * m} values for {pid} m={m}, got {len(values)}")
    return pid, m, NormalizationBounds(np.array(values[:m]), np.array(values[m:]))


def format_bounds_line(pid: str, m: int, bounds: NormalizationBounds) -> str:
    vals = [repr(float(v)) for v in np.concatenate([bounds.ideal, bounds.nadir])]
    return ",".join([pid, str(m), *vals])


@lru_cache(maxsize=1)
def _shipped_bounds() -> dict[tuple[str, int], NormalizationBounds]:
    table = {}
    text = resources.files("stopbench").joinpath("data", BOUNDS_FILE).read_text()
    for line in text.splitlines():
        if line.strip() and not line.startswith("#"):
            pid, m, b = parse_bounds_line(line)
            table[(pid, m)] = b
    return table


def reference_bounds(spec: ProblemSpec) -> NormalizationBounds:
    """True ideal and nadir point of the problem's Pareto front.

    DTLZ1-DTLZ4 are analytic; the rest come from the shipped sampled data
    (see ``scripts/sample_bounds.py``).
    """
    m = spec.m
    if spec.problem_id == "dtlz1":
        return NormalizationBounds(np.zeros(m), np.full(m, 0.5))
    if spec.problem_id in ("dtlz2", "dtlz3", "dtlz4"):
        return NormalizationBounds(np.zeros(m), np.ones(m))
    try:
        return _shipped_bounds()[(spec.problem_id, m)]
    except KeyError:
        raise BoundsError(f"no reference bounds shipped for {spec.problem_id} with m={m}") from None


# ---- Pareto front samplers, used to build and check the bounds data ----

def _simplex_grid(dim, divisions):
    """All points of the regular grid on ``[0, 1]^dim`` with ``divisions`` steps."""
    axes = [np.linspace(0.0, 1.0, divisions + 1)] * dim
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)


def _dtlz7_front_coordinates(n_samples):
    # 1-D set S of f in [0, 1] not beaten by any smaller f with larger f(1+sin 3 pi f).
    # The DTLZ7 front is exactly S^(m-1) lifted onto f_m.
    f = np.linspace(0.0, 1.0, n_samples)
    t = f * (1.0 + np.sin(3.0 * np.pi * f))
    best = np.maximum.accumulate(t)
    keep = np.ones_like(f, dtype=bool)
    keep[1:] = t[1:] > best[:-1]
    return f[keep], t[keep]


def sample_front(spec: ProblemSpec, n_samples: int = 100_000, rng=None) -> np.ndarray:
    """Objective vectors sampled from the Pareto front, extremes included."""
    rng = np.random.default_rng(0) if rng is None else rng
    m, pid = spec.m, spec.problem_id
    if pid == "dtlz7":
        f, t = _dtlz7_front_coordinates(n_samples)
        idx = rng.integers(0, f.size, size=(n_samples, m - 1))
        corners = _simplex_grid(m - 1, 1).astype(bool)
        hi = np.where(corners, f.size - 1, 0)
        idx = np.vstack([idx, hi])
        F = np.empty((idx.shape[0], m))
        F[:, : m - 1] = f[idx]
        F[:, m - 1] = 2.0 * m - np.sum(t[idx], axis=1)
        return F
    x = np.full((n_samples, spec.n), 0.5)
    if pid in ("dtlz5", "dtlz6"):
        x[:, 0] = np.linspace(0.0, 1.0, n_samples)
        if pid == "dtlz6":
            x[:, m - 1:] = 0.0
    else:
        x[:, : m - 1] = rng.random((n_samples, m - 1))
        corners = _simplex_grid(m - 1, 1)
        extra = np.full((corners.shape[0], spec.n), 0.5)
        extra[:, : m - 1] = corners
        x = np.vstack([x, extra])
    return evaluate(spec, x)
