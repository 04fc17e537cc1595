"""Command-line front end: ``stopbench <command> [options]``.

Commands::

    generate  --config C [--out D] [--seed-base N] [--jobs N]
    inflate   ARCHIVE [--out D]
    replay    --config C [--out D] [--jobs N] [ARCHIVE ...]
    evaluate  --config C [--out D] [--alpha A] [--delta E] [--jobs N]
    report    --config C [--out D] [--alpha-sweep 2,3,4,5] [--delta-sweep 0,0.1]

Exit status is 0 on success, 1 for configuration errors and 2 for data or
format errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from stopbench import __version__, experiment
from stopbench.config import load_config
from stopbench.core import ConfigError, StopbenchError
from stopbench.problems import DomainError
from stopbench.traceio import TraceArchive, read_compact, write_naive

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stopbench", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"stopbench {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("--config", required=True, type=Path, help="experiment config file")
        p.add_argument("--out", type=Path, help="output directory (overrides output_dir)")
        return p

    g = with_config(sub.add_parser("generate", help="run the optimizer and store traces"))
    g.add_argument("--seed-base", type=int, help="first seed (overrides seed_base)")
    g.add_argument("--jobs", type=int, default=1)

    i = sub.add_parser("inflate", help="expand one archive into per-iteration files")
    i.add_argument("archive", type=Path)
    i.add_argument("--out", type=Path, help="target directory (default ARCHIVE/naive)")

    r = with_config(sub.add_parser("replay", help="replay criteria over stored traces"))
    r.add_argument("--seed-base", type=int)
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("archives", nargs="*", type=Path, help="archives (default: all configured)")

    e = with_config(sub.add_parser("evaluate", help="score decisions with POSE"))
    e.add_argument("--alpha", type=float)
    e.add_argument("--delta", type=float)
    e.add_argument("--jobs", type=int, default=1)

    rep = with_config(sub.add_parser("report", help="average-rank tables"))
    rep.add_argument("--alpha-sweep", type=_float_list, default=[])
    rep.add_argument("--delta-sweep", type=_float_list, default=[])
    return parser


def _config(args):
    overrides = {
        "experiment.seed_base": getattr(args, "seed_base", None),
        "pose.alpha": getattr(args, "alpha", None),
        "pose.delta": getattr(args, "delta", None),
    }
    cfg = load_config(args.config, overrides)
    out = args.out if args.out is not None else cfg.output_dir
    return cfg, out


def _jobs(args) -> int:
    if args.jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    return args.jobs


def cmd_generate(args) -> int:
    cfg, out = _config(args)
    paths = experiment.generate(cfg, out, _jobs(args))
    print(f"generated {len(paths)} archives under {experiment.archive_root(out)}")
    return EXIT_OK


def cmd_inflate(args) -> int:
    archive = TraceArchive(args.archive)
    trace = read_compact(archive)
    target = args.out if args.out is not None else args.archive / "naive"
    paths = write_naive(trace, target)
    naive = sum(p.stat().st_size for p in paths)
    compact = archive.total_size()
    print(f"naive_files={len(paths)} naive_bytes={naive} compact_bytes={compact} "
          f"ratio={naive / compact:.3f}")
    return EXIT_OK


def cmd_replay(args) -> int:
    cfg, out = _config(args)
    path = experiment.replay_archives(cfg, out, args.archives or None, _jobs(args))
    print(f"wrote {path}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg, out = _config(args)
    path = experiment.evaluate(cfg, out, _jobs(args))
    print(f"wrote {path}")
    return EXIT_OK


def cmd_report(args) -> int:
    cfg, out = _config(args)
    for path in experiment.report(cfg, out, args.alpha_sweep, args.delta_sweep):
        print(f"wrote {path}")
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "inflate": cmd_inflate,
    "replay": cmd_replay,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"stopbench: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StopbenchError, DomainError, OSError) as exc:
        print(f"stopbench: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
