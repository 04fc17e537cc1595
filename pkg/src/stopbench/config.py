"""Experiment configuration files.

INI-style text read with :mod:`configparser`::

    [experiment]
    output_dir = runs/desk
    runs = 5
    seed_base = 1
    encoding = text
    problems = dtlz2:2, dtlz7:2

    [algorithm.nsga2]
    mu = 20
    lambda = 20
    fe_max = 20000

    [criterion.isc]
    patience = 50

    [criterion.mgbm-strict]
    type = mgbm
    i_min = 0.05

    [pose]
    alpha = 2
    delta = 0

Each ``criterion.<label>`` section configures one criterion; ``type``
defaults to the label. Problems are ``id:m`` or ``id:m:n``.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from stopbench.core import ENCODINGS, ConfigError
from stopbench.criteria import CRITERIA, params_from_mapping
from stopbench.optimizer import EvolverConfig
from stopbench.pose import PoseParams
from stopbench.problems import ProblemSpec

_ALGO_KEYS = {
    "mu": int,
    "lambda": int,
    "fe_max": int,
    "sbx_eta": float,
    "sbx_prob": float,
    "pm_eta": float,
    "pm_prob": float,
}


@dataclass(frozen=True)
class CriterionConfig:
    label: str
    kind: str
    params: object


@dataclass
class ExperimentConfig:
    problems: list[ProblemSpec]
    algorithms: list[EvolverConfig]
    criteria: list[CriterionConfig]
    runs: int = 1
    seed_base: int = 0
    encoding: str = "text"
    alpha: float = 2.0
    delta: float = 0.0
    output_dir: Path = Path("stopbench-out")
    text: str = field(default="", repr=False)

    def __post_init__(self):
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if not self.problems or not self.algorithms or not self.criteria:
            raise ConfigError("need at least one problem, algorithm and criterion")
        if self.encoding not in ENCODINGS:
            raise ConfigError(f"encoding must be one of {ENCODINGS}")
        labels = [c.label for c in self.criteria]
        if len(set(labels)) != len(labels):
            raise ConfigError("criterion labels must be unique")
        PoseParams(self.alpha, self.delta)

    @property
    def seeds(self) -> list[int]:
        return [self.seed_base + i for i in range(self.runs)]

    def pose_params(self, fe_max: int) -> PoseParams:
        return PoseParams(self.alpha, self.delta, fe_max)

    @property
    def digest(self) -> str:
        """Hash of the effective configuration, overrides included."""
        return hashlib.sha256(self.text.encode("utf-8")).hexdigest()[:16]


def _parse_problem(token: str) -> ProblemSpec:
    parts = token.strip().split(":")
    try:
        if len(parts) == 2:
            return ProblemSpec(parts[0], int(parts[1]))
        if len(parts) == 3:
            return ProblemSpec(parts[0], int(parts[1]), int(parts[2]))
    except ValueError:
        pass
    raise ConfigError(f"bad problem entry {token!r}; expected id:m or id:m:n")


def _canonical(cp: configparser.ConfigParser) -> str:
    lines = []
    for section in sorted(cp.sections()):
        lines.append(f"[{section}]")
        for key in sorted(cp[section]):
            lines.append(f"{key} = {cp[section][key]}")
    return "\n".join(lines) + "\n"


def parse_config(text: str, overrides: dict | None = None) -> ExperimentConfig:
    """Parse configuration text; ``overrides`` maps ``section.key`` to a value."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str.lower
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax: {exc}") from None
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        section, _, key = dotted.rpartition(".")
        if not cp.has_section(section):
            cp.add_section(section)
        cp[section][key] = str(value)

    if not cp.has_section("experiment"):
        raise ConfigError("missing [experiment] section")
    exp = cp["experiment"]
    try:
        runs = int(exp.get("runs", "1"))
        seed_base = int(exp.get("seed_base", "0"))
    except ValueError as exc:
        raise ConfigError(f"[experiment]: {exc}") from None
    encoding = exp.get("encoding", "text")
    problems = [_parse_problem(t) for t in exp.get("problems", "").split(",") if t.strip()]

    algorithms = []
    criteria = []
    for section in cp.sections():
        kind, _, label = section.partition(".")
        if kind == "algorithm":
            values = dict(cp[section])
            kwargs = {}
            for key, raw in values.items():
                if key not in _ALGO_KEYS:
                    raise ConfigError(f"[{section}]: unknown key {key!r}")
                try:
                    kwargs["lam" if key == "lambda" else key] = _ALGO_KEYS[key](raw)
                except ValueError:
                    raise ConfigError(f"[{section}]: bad value {raw!r} for {key}") from None
            algorithms.append(EvolverConfig(algorithm_id=label, encoding=encoding, **kwargs))
        elif kind == "criterion":
            values = dict(cp[section])
            ctype = values.pop("type", label)
            if ctype not in CRITERIA:
                raise ConfigError(f"[{section}]: unknown criterion type {ctype!r}")
            criteria.append(CriterionConfig(label, ctype, params_from_mapping(ctype, values)))
        elif section not in ("experiment", "pose"):
            raise ConfigError(f"unknown section [{section}]")

    pose_sec = cp["pose"] if cp.has_section("pose") else {}
    try:
        alpha = float(pose_sec.get("alpha", "2"))
        delta = float(pose_sec.get("delta", "0"))
    except ValueError as exc:
        raise ConfigError(f"[pose]: {exc}") from None

    return ExperimentConfig(
        problems=problems,
        algorithms=algorithms,
        criteria=criteria,
        runs=runs,
        seed_base=seed_base,
        encoding=encoding,
        alpha=alpha,
        delta=delta,
        output_dir=Path(exp.get("output_dir", "stopbench-out")),
        text=_canonical(cp),
    )


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, overrides)
