"""
Command Line
------------

    python -m src.cli simulate --config configs/run.toml --seed 3 --out runs/s3
    python -m src.cli ablate --axis memory --config configs/run.toml --seeds 0 1 2 --out runs/memory
    python -m src.cli report --in runs/memory --format csv
    python -m src.cli gen-grasps --mesh part.stl --gripper configs/gripper.toml --out db/part.json

``--set section.key=value`` overrides single config fields (TOML syntax for
the value, bare words are strings).
"""

import argparse
import logging
import sys
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from src.config import RunConfig
from src.errors import BinPickError, ConfigError
from src.grasping.database import build_database, write_db
from src.grasping.gripper import GripperModel
from src.objects import CATALOGUE, get_object_model
from src.simulation.ablation import AblationAxis, run_ablation
from src.simulation.report import ReportFormat, build_report
from src.simulation.runner import run

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s %(levelname)-7s %(name)s: %(message)s'


def parse_overrides(items: Sequence[str]) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    for item in items:
        key, sep, raw = item.partition('=')
        if not sep or not key:
            raise ConfigError(f"override {item!r} is not key=value")
        try:
            overrides[key.strip()] = tomllib.loads(f"value = {raw}")['value']
        except tomllib.TOMLDecodeError:
            overrides[key.strip()] = raw
    return overrides


def load_config(path: Optional[str], overrides: Sequence[str] = (), seed: Optional[int] = None) -> RunConfig:
    config = RunConfig.load(path) if path else RunConfig()
    values = parse_overrides(overrides)
    if seed is not None:
        values['seed'] = seed
    return config.with_overrides(values) if values else config


# =============================================================================
# COMMANDS
# =============================================================================

def cmd_simulate(args: argparse.Namespace) -> int:
    config = load_config(args.config, args.set, args.seed)
    result = run(config, args.out, dump_scenes=args.dump_scenes)
    metrics = result.metrics
    sr = 'n/a' if metrics.sr is None else f"{metrics.sr:.3f}"
    eer = 'n/a' if metrics.eer is None else f"{metrics.eer:.3f}"
    print(f"iterations={metrics.iterations} attempts={metrics.attempts} successes={metrics.successes} "
          f"MPPH={metrics.mpph:.1f} SR={sr} EER={eer}")
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    config = load_config(args.config, args.set)
    seeds = args.seeds if args.seeds else list(range(args.n_seeds))
    report = run_ablation(config, AblationAxis(args.axis), seeds, args.out)
    print(report.comparison.to_csv(index=False, float_format='%.4f'), end='')
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    print(build_report(args.input, ReportFormat(args.format)), end='')
    return 0


def cmd_gen_grasps(args: argparse.Namespace) -> int:
    config = load_config(args.config, args.set)
    gripper = GripperModel.load(args.gripper) if args.gripper else config.gripper
    if args.mesh in CATALOGUE:
        model = get_object_model(args.mesh)
    else:
        class_id = args.class_id or Path(args.mesh).stem
        model = get_object_model(class_id, args.mesh, args.scale)
    database = build_database(model.class_id, model.mesh, model.center, gripper, config.grasp_gen,
                              strict=args.strict)
    write_db(args.out, database)
    print(f"{len(database)} candidates for {model.class_id!r} -> {args.out}")
    return 0


# =============================================================================
# PARSER
# =============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='binpick', description='Bin-picking planning and evaluation')
    parser.add_argument('--log-level', default='INFO', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
    sub = parser.add_subparsers(dest='command', required=True)

    def add_config(p: argparse.ArgumentParser) -> None:
        p.add_argument('--config', help='run configuration (TOML)')
        p.add_argument('--set', action='append', default=[], metavar='KEY=VALUE',
                       help='override one config field, e.g. buffer.memory=false')

    p = sub.add_parser('simulate', help='run one simulated picking session')
    add_config(p)
    p.add_argument('--seed', type=int)
    p.add_argument('--out', help='output directory')
    p.add_argument('--dump-scenes', action='store_true', help='write voxels, depth and poses per iteration')
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser('ablate', help='paired comparison of two pipeline variants')
    add_config(p)
    p.add_argument('--axis', required=True, choices=[a.value for a in AblationAxis])
    p.add_argument('--seeds', type=int, nargs='*', help='explicit seeds')
    p.add_argument('--n-seeds', type=int, default=10, help='seeds 0..n-1 when --seeds is absent')
    p.add_argument('--out', help='output directory')
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser('report', help='tabulate run summaries')
    p.add_argument('--in', dest='input', required=True, help='run or ablation directory')
    p.add_argument('--format', default='csv', choices=[f.value for f in ReportFormat])
    p.set_defaults(func=cmd_report)

    p = sub.add_parser('gen-grasps', help='build a grasp candidate database')
    add_config(p)
    p.add_argument('--mesh', required=True, help=f"STL/OBJ path or a built-in class ({', '.join(sorted(CATALOGUE))})")
    p.add_argument('--gripper', help='gripper description (TOML)')
    p.add_argument('--class-id', help='class id for file meshes (default: file stem)')
    p.add_argument('--scale', type=float, default=1.0, help='mesh units to meters')
    p.add_argument('--strict', action='store_true', help='fail when the sample budget runs out')
    p.add_argument('--out', required=True, help='database file (JSON)')
    p.set_defaults(func=cmd_gen_grasps)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT)
    try:
        return args.func(args)
    except BinPickError as exc:
        logger.error("%s", exc)
        return 2


if __name__ == '__main__':
    sys.exit(main())
