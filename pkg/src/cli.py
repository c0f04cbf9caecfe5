"""
Command-line entry point.

    python -m src.cli simulate --config cfg.yaml --scene bar:width=8,speed=500 --out events.csv
    python -m src.cli response --config cfg.yaml --input sweep:lo=1,hi=1e6 --out sweep.csv
    python -m src.cli correct --renders renders.csv --refs refs.csv --out correction.yaml

Environment (a .env file is honoured):
    EVBLUR_WORKERS     default worker count for simulate
    EVBLUR_LOG_LEVEL   default log level
"""

import argparse
import csv
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from dotenv import load_dotenv

from src.config import SimulationConfig, fingerprint, load_config, save_config
from src.errors import EventBlurError, InvalidArgumentError
from src.event_io import write_events
from src.recon_tools import fit_translated_gamma
from src.response import format_table, run_response_spec
from src.scenes import parse_scene_spec
from src.simulator import event_statistics, simulate

logger = logging.getLogger(__name__)

GAIN_COLUMN = 'gain'


def _load(path: Optional[str]) -> SimulationConfig:
    return load_config(path) if path else SimulationConfig()


def cmd_simulate(args) -> int:
    cfg = _load(args.config)

    sim = cfg.sim
    if args.infinite_bandwidth:
        sim = replace(sim, infinite_bandwidth=True)
    if args.workers is not None:
        sim = replace(sim, workers=args.workers)
    camera = cfg.camera if args.seed is None else replace(cfg.camera, seed=args.seed)
    cfg = replace(cfg, sim=sim, camera=camera)

    scene = parse_scene_spec(args.scene)
    stream = simulate(scene, cfg.radiometry, cfg.pixel, cfg.camera, cfg.sim,
                      fingerprint=fingerprint(cfg))
    path = write_events(stream, args.out, args.format)

    stats = event_statistics(stream)
    print(f"✓ {stats['total']} events ({stats['positive']} positive, "
          f"{stats['negative']} negative) -> {path}")
    return 0


def cmd_response(args) -> int:
    cfg = _load(args.config)
    header, rows = run_response_spec(cfg.pixel, args.input, n=args.samples)
    Path(args.out).write_text(format_table(header, rows, precision=10))
    print(f"✓ {len(rows)} rows -> {args.out}")
    return 0


def _read_table(path: str) -> Tuple[List[str], np.ndarray]:
    with open(path, 'r', newline='') as f:
        reader = csv.reader(row for row in f if not row.startswith('#'))
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InvalidArgumentError(f"{path} is empty")
        try:
            rows = [[float(v) for v in row] for row in reader if row]
        except ValueError as e:
            raise InvalidArgumentError(f"{path}: {e}")
    if not rows:
        raise InvalidArgumentError(f"{path} has no data rows")
    return header, np.array(rows)


def cmd_correct(args) -> int:
    render_cols, renders = _read_table(args.renders)
    ref_cols, refs = _read_table(args.refs)

    if renders.shape[0] != refs.shape[0]:
        raise InvalidArgumentError(
            f"{renders.shape[0]} render rows but {refs.shape[0]} reference rows")

    gain = 1.0
    if GAIN_COLUMN in ref_cols:
        i = ref_cols.index(GAIN_COLUMN)
        gain = refs[:, i]
        refs = np.delete(refs, i, axis=1)
        ref_cols = ref_cols[:i] + ref_cols[i + 1:]
    if ref_cols != render_cols:
        raise InvalidArgumentError(
            f"channel columns differ: {render_cols} vs {ref_cols}")

    fit = fit_translated_gamma(renders, refs, gain)
    cfg = replace(_load(args.config), correction=fit.params)
    save_config(cfg, args.out)

    p = fit.params
    print(f"✓ a={p.a:.6f} b={np.round(p.b, 6).tolist()} c={np.round(p.c, 6).tolist()}")
    print(f"  SSR {fit.initial_ssr:.4e} -> {fit.ssr:.4e} in {fit.iterations} iterations")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='evblur',
                                     description="Event camera pixel bandwidth toolkit")
    parser.add_argument('--workers', type=int, default=None,
                        help="worker processes for simulate (env EVBLUR_WORKERS)")
    parser.add_argument('--log-level', default=None,
                        help="DEBUG, INFO, WARNING... (env EVBLUR_LOG_LEVEL)")
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('simulate', help="simulate an event stream")
    p.add_argument('--config')
    p.add_argument('--scene', required=True, help="bar:... or frames:path=... or file.npz")
    p.add_argument('--out', required=True)
    p.add_argument('--format', choices=['csv', 'bin'], default=None)
    p.add_argument('--infinite-bandwidth', action='store_true')
    p.add_argument('--seed', type=int, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser('response', help="filter responses and bandwidth curves")
    p.add_argument('--config')
    p.add_argument('--input', required=True, help="step:/ramp:/sine:/sweep:/bode: spec")
    p.add_argument('--out', required=True)
    p.add_argument('--samples', type=int, default=2000)
    p.set_defaults(func=cmd_response)

    p = sub.add_parser('correct', help="fit a translated-gamma correction")
    p.add_argument('--config', help="config to embed the correction into")
    p.add_argument('--renders', required=True)
    p.add_argument('--refs', required=True)
    p.add_argument('--out', required=True)
    p.set_defaults(func=cmd_correct)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)

    level = args.log_level or os.getenv('EVBLUR_LOG_LEVEL', 'WARNING')
    logging.basicConfig(level=level.upper(),
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')

    if args.workers is None and os.getenv('EVBLUR_WORKERS'):
        args.workers = int(os.environ['EVBLUR_WORKERS'])

    try:
        return args.func(args)
    except EventBlurError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 2


if __name__ == '__main__':
    sys.exit(main())
