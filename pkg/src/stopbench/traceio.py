"""Trace storage: the compact ``fx``/``id`` pair and naive per-iteration files.

Compact layout of one run directory::

    meta.txt   key=value lines (m, mu, lambda, t_max, problem, algorithm, seed, encoding)
    fx.csv     fe_max lines, one objective vector per line, in evaluation order
    id.csv     t_max lines, mu comma-separated 1-based line numbers of fx.csv

The naive layout is ``fP_1.csv`` ... ``fP_<t_max>.csv``, each holding the mu
vectors of one population. No header rows; fields are comma separated and
every line ends with ``\\n``.

Reals are written either as shortest round-trip decimals (``text``) or as
the RFC 4648 Base64 image of their big-endian IEEE-754 binary64 bytes
(``base64``, always 12 characters including one ``=`` pad).
"""

from __future__ import annotations

import base64
import binascii
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from stopbench.core import (
    ENCODINGS,
    FormatError,
    PopulationSnapshot,
    RangeError,
    RunMeta,
    RunTrace,
    nondominated_subset,
)

FX_NAME = "fx.csv"
ID_NAME = "id.csv"
META_NAME = "meta.txt"
NAIVE_PATTERN = "fP_{t}.csv"

_META_KEYS = ("m", "mu", "lambda", "t_max", "problem", "algorithm", "seed", "encoding")
_BIG_DOUBLE = struct.Struct(">d")


def encode_real(x: float, mode: str = "text") -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot encode non-finite value {x!r}")
    if mode == "base64":
        return base64.b64encode(_BIG_DOUBLE.pack(x)).decode("ascii")
    if mode == "text":
        return repr(float(x))
    raise ValueError(f"unknown encoding {mode!r}")


def decode_real(field: str, mode: str = "text") -> float:
    if mode == "base64":
        if len(field) != 12:
            raise FormatError(f"base64 field must be 12 characters, got {field!r}")
        try:
            raw = base64.b64decode(field, validate=True)
        except (binascii.Error, ValueError):
            raise FormatError(f"malformed base64 field {field!r}") from None
        if len(raw) != 8 or base64.b64encode(raw).decode("ascii") != field:
            raise FormatError(f"malformed base64 field {field!r}")
        value = _BIG_DOUBLE.unpack(raw)[0]
    elif mode == "text":
        try:
            value = float(field)
        except ValueError:
            raise FormatError(f"unparseable number {field!r}") from None
    else:
        raise ValueError(f"unknown encoding {mode!r}")
    if not math.isfinite(value):
        raise FormatError(f"non-finite value {field!r}")
    return value


def _format_rows(P, mode):
    return "".join(",".join(encode_real(float(v), mode) for v in row) + "\n" for row in P)


def _parse_vectors(path: Path, m: int, mode: str) -> np.ndarray:
    rows = []
    with open(path, encoding="ascii", newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            fields = line.rstrip("\n").split(",")
            if len(fields) != m:
                raise FormatError(f"{path}:{lineno}: expected {m} fields, got {len(fields)}")
            try:
                rows.append([decode_real(f, mode) for f in fields])
            except FormatError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
    return np.asarray(rows, dtype=np.float64).reshape(len(rows), m)


@dataclass(frozen=True)
class TraceArchive:
    """File locations of one run in compact form."""

    directory: Path

    @property
    def meta_path(self) -> Path:
        return self.directory / META_NAME

    @property
    def fx_path(self) -> Path:
        return self.directory / FX_NAME

    @property
    def id_path(self) -> Path:
        return self.directory / ID_NAME

    def files(self):
        return (self.meta_path, self.fx_path, self.id_path)

    def total_size(self) -> int:
        return self.fx_path.stat().st_size + self.id_path.stat().st_size


def format_meta(meta: RunMeta) -> str:
    values = (meta.m, meta.mu, meta.lam, meta.t_max, meta.problem_id,
              meta.algorithm_id, meta.seed, meta.encoding)
    return "".join(f"{k}={v}\n" for k, v in zip(_META_KEYS, values))


def read_meta(path: Path) -> RunMeta:
    path = Path(path)
    items = {}
    try:
        lines = path.read_text(encoding="ascii").splitlines()
    except OSError as exc:
        raise FormatError(f"{path}: cannot read manifest ({exc.strerror})") from None
    for lineno, line in enumerate(lines, start=1):
        if not line.strip() or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise FormatError(f"{path}:{lineno}: expected key=value, got {line!r}")
        items[key.strip()] = value.strip()
    missing = [k for k in _META_KEYS if k not in items]
    if missing:
        raise FormatError(f"{path}: missing keys {', '.join(missing)}")
    try:
        return RunMeta(
            m=int(items["m"]),
            mu=int(items["mu"]),
            lam=int(items["lambda"]),
            t_max=int(items["t_max"]),
            problem_id=items["problem"],
            algorithm_id=items["algorithm"],
            seed=int(items["seed"]),
            encoding=items["encoding"],
        )
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_compact(
    trace: RunTrace, directory, encoding: str | None = None, comment: str | None = None
) -> TraceArchive:
    """Write ``trace`` as meta/fx/id files into ``directory`` (created if needed).

    ``encoding`` overrides the trace's own encoding; the manifest records
    whichever is used. ``comment`` becomes a leading ``#`` line of the manifest.
    """
    meta = trace.meta
    if encoding is not None and encoding != meta.encoding:
        if encoding not in ENCODINGS:
            raise ValueError(f"unknown encoding {encoding!r}")
        meta = RunMeta(**{**meta.__dict__, "encoding": encoding})
    archive = TraceArchive(Path(directory))
    archive.directory.mkdir(parents=True, exist_ok=True)
    head = f"# {comment}\n" if comment else ""
    archive.meta_path.write_text(head + format_meta(meta), encoding="ascii")
    archive.fx_path.write_text(_format_rows(trace.points, meta.encoding), encoding="ascii")
    ids = "".join(",".join(map(str, row)) + "\n" for row in trace.memberships.tolist())
    archive.id_path.write_text(ids, encoding="ascii")
    return archive


def read_compact(archive) -> RunTrace:
    """Load a compact archive, checking it against its manifest."""
    if not isinstance(archive, TraceArchive):
        archive = TraceArchive(Path(archive))
    meta = read_meta(archive.meta_path)
    for path in (archive.fx_path, archive.id_path):
        if not path.is_file():
            raise FormatError(f"{path}: missing")
    points = _parse_vectors(archive.fx_path, meta.m, meta.encoding)
    if points.shape[0] != meta.fe_max:
        raise FormatError(
            f"{archive.fx_path}:{points.shape[0]}: holds {points.shape[0]} lines, "
            f"manifest implies {meta.fe_max}"
        )
    rows = []
    with open(archive.id_path, encoding="ascii", newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            fields = line.rstrip("\n").split(",")
            if len(fields) != meta.mu:
                raise FormatError(
                    f"{archive.id_path}:{lineno}: expected {meta.mu} ids, got {len(fields)}"
                )
            try:
                row = [int(f) for f in fields]
            except ValueError:
                raise FormatError(f"{archive.id_path}:{lineno}: non-integer id") from None
            limit = meta.mu + meta.lam * (lineno - 1)
            bad = [i for i in row if not 1 <= i <= min(limit, meta.fe_max)]
            if bad:
                raise FormatError(
                    f"{archive.id_path}:{lineno}: id {bad[0]} outside [1, {min(limit, meta.fe_max)}]"
                )
            rows.append(row)
    if len(rows) != meta.t_max:
        raise FormatError(
            f"{archive.id_path}:{len(rows)}: holds {len(rows)} lines, manifest says t_max={meta.t_max}"
        )
    return RunTrace(meta, points, np.asarray(rows, dtype=np.int64))


def naive_paths(directory, t_max: int) -> list[Path]:
    directory = Path(directory)
    return [directory / NAIVE_PATTERN.format(t=t) for t in range(1, t_max + 1)]


def write_naive(trace: RunTrace, directory, encoding: str | None = None) -> list[Path]:
    """Write one ``fP_t.csv`` per iteration. Returns the paths in order."""
    mode = encoding or trace.meta.encoding
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = naive_paths(directory, trace.meta.t_max)
    # format each distinct vector once; naive files repeat survivors
    lines = _format_rows(trace.points, mode).splitlines(keepends=True)
    for path, row in zip(paths, trace.memberships):
        path.write_text("".join(lines[i - 1] for i in row), encoding="ascii")
    return paths


def read_naive(directory, meta: RunMeta) -> list[PopulationSnapshot]:
    """Load ``fP_1.csv`` ... as snapshots."""
    out = []
    for t, path in enumerate(naive_paths(directory, meta.t_max), start=1):
        if not path.is_file():
            raise FormatError(f"{path}: missing")
        P = _parse_vectors(path, meta.m, meta.encoding)
        if P.shape[0] != meta.mu:
            raise FormatError(f"{path}:{P.shape[0]}: expected {meta.mu} lines")
        out.append(PopulationSnapshot(t, P))
    return out


def snapshot(trace: RunTrace, t: int) -> PopulationSnapshot:
    return trace.snapshot(t)


def unbounded_archive(trace: RunTrace, t: int) -> np.ndarray:
    """Non-dominated vectors among everything evaluated up to iteration ``t``."""
    if not 1 <= t <= trace.meta.t_max:
        raise RangeError(f"iteration {t} outside [1, {trace.meta.t_max}]")
    n = trace.meta.mu + trace.meta.lam * (t - 1)
    return nondominated_subset(trace.points[:n])


def compact_size(trace: RunTrace, encoding: str | None = None) -> int:
    """Bytes the fx/id pair would occupy, without touching disk."""
    mode = encoding or trace.meta.encoding
    fx = len(_format_rows(trace.points, mode))
    ids = sum(len(",".join(map(str, row))) + 1 for row in trace.memberships.tolist())
    return fx + ids


def naive_size(trace: RunTrace, encoding: str | None = None) -> int:
    """Bytes the ``fP_t.csv`` files would occupy, without touching disk."""
    mode = encoding or trace.meta.encoding
    lens = np.array([len(line) for line in _format_rows(trace.points, mode).splitlines(keepends=True)])
    return int(lens[trace.memberships - 1].sum())
