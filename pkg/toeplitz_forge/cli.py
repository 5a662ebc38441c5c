import argparse
import sys
from pathlib import Path
from typing import Dict, List, Optional

from pydantic import ValidationError

from .choquet import SimplexSpec
from .config import ForgeSettings, configure_logging, format_validation_error
from .errors import (
    BundleFormatError,
    FactorizationError,
    ForgeError,
    InputInvalidError,
    LevelRangeError,
    NeedsMoreLevelsError,
)
from .invariants import simplex_vertices, vertex_state
from .io import emit_window, load_bundle, load_sequence, load_simplex_spec, save_bundle
from .pipeline import SystemBundle, realize_simplex, verify_bundle, worked_example, z_to_zd
from .reports import Report

# errors caused by what the user asked for rather than by the mathematics
_USAGE_ERRORS = (InputInvalidError, FactorizationError, BundleFormatError, NeedsMoreLevelsError, LevelRangeError)


def _fail(message: str) -> None:
    print(f"❌ {message}", file=sys.stderr)


def _summarize(reports: Dict[str, Report]) -> bool:
    failed = [r for r in reports.values() if not r.passed]
    for report in failed:
        print(report.render(), file=sys.stderr)
    total = sum(len(r.checks) for r in reports.values())
    if failed:
        _fail(f"{len(failed)} of {len(reports)} reports failed")
    else:
        print(f"✓ {len(reports)} reports, {total} checks passed")
    return not failed


def _finish(bundle: SystemBundle, args) -> int:
    out = save_bundle(bundle, args.out)
    print(f"✓ Bundle written to {out}")
    if getattr(args, "window", None) is not None:
        for path in emit_window(bundle, args.window, out):
            print(f"✓ Window written to {path}")
    return 0 if _summarize(bundle.reports) else 1


def cmd_realize(args, settings: ForgeSettings) -> int:
    """Build a bundle realizing a finite or stagewise simplex"""
    if args.stagewise:
        spec = load_simplex_spec(args.stagewise)
    else:
        if args.extremes < 1:
            raise InputInvalidError(f"--extremes must be at least 1, got {args.extremes}")
        spec = SimplexSpec.finite(args.extremes)
    bundle = realize_simplex(spec, args.group_dim, args.depth, seed=args.seed, k=args.k, settings=settings)
    return _finish(bundle, args)


def cmd_z_to_zd(args, settings: ForgeSettings) -> int:
    """Carry a managed Z presentation to Z^d"""
    if args.from_bundle:
        managed = load_bundle(args.from_bundle, settings).managed
        p, mats = list(managed.p), list(managed.mats)
    else:
        p, mats = load_sequence(args.input)
    bundle = z_to_zd(p, mats, args.group_dim, depth=args.depth, seed=args.seed,
                     pre_telescope=args.pre_telescope, settings=settings)
    return _finish(bundle, args)


def cmd_example(args, settings: ForgeSettings) -> int:
    """Build the worked four-blocks-per-level example"""
    bundle = worked_example(args.group_dim, args.levels, seed=args.seed, settings=settings)
    return _finish(bundle, args)


def cmd_verify(args, settings: ForgeSettings) -> int:
    """Re-run every check of a stored bundle"""
    bundle = load_bundle(args.bundle, settings)
    try:
        reports = verify_bundle(bundle, settings)
    except ForgeError as e:
        _fail(f"Verification aborted: {e}")
        return 1
    return 0 if _summarize(reports) else 1


def cmd_window(args, settings: ForgeSettings) -> int:
    """Write x0 on a centered window"""
    bundle = load_bundle(args.bundle, settings)
    out = args.out or args.bundle
    for path in emit_window(bundle, args.radius, out, fmt=args.format):
        print(f"✓ Window written to {path}")
    return 0


def _approximant(bundle: SystemBundle):
    return bundle.approximant if bundle.approximant is not None else bundle.managed


def cmd_vertices(args, settings: ForgeSettings) -> int:
    """Print the stage vertices as exact rationals"""
    seq = _approximant(load_bundle(args.bundle, settings))
    stages = [args.stage] if args.stage is not None else range(len(seq.mats))
    for stage in stages:
        approx = simplex_vertices(seq, stage)
        print(f"stage {stage}:")
        for i, v in enumerate(approx.vertices, start=1):
            print(f"  v{i} = ({', '.join(str(x) for x in v)})")
    return 0


def cmd_states(args, settings: ForgeSettings) -> int:
    """Print the state carried by one stage vertex"""
    seq = _approximant(load_bundle(args.bundle, settings))
    if not 0 <= args.stage < len(seq.mats):
        raise LevelRangeError(f"Stage {args.stage} outside 0..{len(seq.mats) - 1}")
    if not 1 <= args.vertex <= seq.k[args.stage + 1]:
        raise InputInvalidError(f"Vertex {args.vertex} outside 1..{seq.k[args.stage + 1]}")
    states = vertex_state(seq, args.stage, args.vertex)
    for n, z in enumerate(states.z):
        print(f"z_{n} = ({', '.join(str(x) for x in z)})")
    return 0


def cmd_config(args, settings: Optional[ForgeSettings]) -> int:
    """Show where every setting comes from"""
    return 0 if ForgeSettings.diagnose() else 1


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="Log debug messages to stderr")

    parser = argparse.ArgumentParser(
        prog="toeplitz-forge",
        description="Build and verify Toeplitz Z^d subshifts realizing Choquet simplices",
    )
    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    realize = subparsers.add_parser("realize-simplex", parents=[common], help="Realize a simplex")
    target = realize.add_mutually_exclusive_group(required=True)
    target.add_argument("--extremes", type=int, help="Number of extreme points of a finite simplex")
    target.add_argument("--stagewise", type=Path, help="JSON file with stagewise stochastic matrices")
    realize.add_argument("--group-dim", type=int, default=1, help="d of the acting group Z^d (default: 1)")
    realize.add_argument("--depth", type=int, default=4, help="Number of simplex stages (default: 4)")
    realize.add_argument("--k", type=int, default=None, help="Matrix size for finite simplices")
    realize.add_argument("--seed", type=int, default=None, help="Seed for the free-coset order")
    realize.add_argument("--window", type=int, default=None, help="Also emit x0 on this radius")
    realize.add_argument("-o", "--out", type=Path, required=True, help="Bundle directory")
    realize.set_defaults(func=cmd_realize)

    ztozd = subparsers.add_parser("z-to-zd", parents=[common], help="Carry a Z presentation to Z^d")
    source = ztozd.add_mutually_exclusive_group(required=True)
    source.add_argument("--input", type=Path, help="JSON file with p and matrices")
    source.add_argument("--from-bundle", type=Path, help="Use the managed sequence of a bundle")
    ztozd.add_argument("--group-dim", type=int, default=2, help="d of the target group Z^d (default: 2)")
    ztozd.add_argument("--depth", type=int, default=None, help="Use only the first DEPTH input matrices")
    ztozd.add_argument("--pre-telescope", action="store_true", help="Merge levels until ratios factor")
    ztozd.add_argument("--seed", type=int, default=None, help="Seed for the free-coset order")
    ztozd.add_argument("--window", type=int, default=None, help="Also emit x0 on this radius")
    ztozd.add_argument("-o", "--out", type=Path, required=True, help="Bundle directory")
    ztozd.set_defaults(func=cmd_z_to_zd)

    example = subparsers.add_parser("example", parents=[common], help="Build the worked example")
    example.add_argument("--group-dim", type=int, choices=(1, 2), default=1, help="Z or Z^2 (default: 1)")
    example.add_argument("--levels", type=int, default=3, help="Stored levels (default: 3)")
    example.add_argument("--seed", type=int, default=None, help="Seed for the free-coset order")
    example.add_argument("--window", type=int, default=None, help="Also emit x0 on this radius")
    example.add_argument("-o", "--out", type=Path, required=True, help="Bundle directory")
    example.set_defaults(func=cmd_example)

    verify = subparsers.add_parser("verify", parents=[common], help="Re-verify a stored bundle")
    verify.add_argument("--bundle", type=Path, required=True, help="Bundle directory")
    verify.set_defaults(func=cmd_verify)

    window = subparsers.add_parser("window", parents=[common], help="Emit x0 on a window")
    window.add_argument("--bundle", type=Path, required=True, help="Bundle directory")
    window.add_argument("--radius", type=int, required=True, help="Window radius")
    window.add_argument("--format", choices=("auto", "csv", "pgm"), default="auto",
                        help="auto writes CSV, plus PGM on Z^2")
    window.add_argument("-o", "--out", type=Path, default=None, help="Output directory (default: the bundle)")
    window.set_defaults(func=cmd_window)

    vertices = subparsers.add_parser("vertices", parents=[common], help="Print stage simplex vertices")
    vertices.add_argument("--bundle", type=Path, required=True, help="Bundle directory")
    vertices.add_argument("--stage", type=int, default=None, help="Only this stage")
    vertices.set_defaults(func=cmd_vertices)

    states = subparsers.add_parser("states", parents=[common], help="Print the state of a stage vertex")
    states.add_argument("--bundle", type=Path, required=True, help="Bundle directory")
    states.add_argument("--stage", type=int, required=True, help="Stage of the vertex")
    states.add_argument("--vertex", type=int, required=True, help="Vertex number, from 1")
    states.set_defaults(func=cmd_states)

    config = subparsers.add_parser("config", parents=[common], help="Diagnose settings")
    config.set_defaults(func=cmd_config)
    return parser


def run(argv: Optional[List[str]] = None) -> int:
    """Parse ``argv`` and run one command; returns the exit code"""
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2

    if not args.command:
        parser.print_help()
        return 2

    if args.command == "config":
        configure_logging("DEBUG" if args.verbose else None)
        return args.func(args, None)

    try:
        settings = ForgeSettings.load()
    except ValidationError as e:
        format_validation_error(e)
        return 2
    configure_logging("DEBUG" if args.verbose else settings.log_level)

    try:
        return args.func(args, settings)
    except _USAGE_ERRORS as e:
        _fail(str(e))
        return 2
    except ForgeError as e:
        _fail(f"{type(e).__name__}: {e}")
        return 1
    except OSError as e:
        _fail(f"Cannot access '{e.filename}': {e.strerror}")
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
