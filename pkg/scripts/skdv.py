#!/usr/bin/env python3
"""
Command-line entry point for the Schrodinger-KdV laboratory.

Status: Active
Usage: python scripts/skdv.py <experiment> [--config FILE] [--set key=value ...]
                              [--out DIR] [--assert] [--plot] [--log-level LEVEL]
Output: CSV reports, `summary.json` and `MANIFEST.json` in `outputs/<experiment>/`
        (or --out); `error.json` on failure

Exit codes: 0 success, 2 validation / input error, 3 numerical blow-up,
4 acceptance band missed (with --assert). SKDV_THREADS caps the worker pool.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from errors import SkdvError
from harness import EXPERIMENTS, load_config, resolve_output_dir, run, write_json

logger = logging.getLogger('skdv')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Schrodinger-KdV spectral simulation and verification lab')
    parser.add_argument('experiment', choices=EXPERIMENTS)
    parser.add_argument('--config', type=Path, default=None,
                        help='flat key=value config (default: data/configs/<experiment>.cfg)')
    parser.add_argument('--set', dest='overrides', action='append', default=[], metavar='KEY=VALUE',
                        help='override one config entry; may be repeated')
    parser.add_argument('--out', type=Path, default=None, help='report directory')
    parser.add_argument('--assert', dest='assert_bands', action='store_true',
                        help='exit 4 when an acceptance band is missed')
    parser.add_argument('--plot', action='store_true', help='also write PNG figures')
    parser.add_argument('--log-level', default='INFO',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
    return parser


def _report_error(exc: SkdvError, out_dir: Optional[Path]) -> None:
    payload = exc.to_dict()
    print(json.dumps(payload), file=sys.stderr)
    if out_dir is not None:
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            write_json(payload, out_dir / 'error.json')
        except OSError as io_exc:
            logger.warning("could not write error.json: %s", io_exc)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')

    print("=" * 70)
    print(f"SKDV - {args.experiment.upper()}")
    print("=" * 70)

    out_dir = args.out
    try:
        cfg = load_config(args.config, args.overrides, experiment=args.experiment)
        out_dir = resolve_output_dir(cfg, args.out)
        result = run(cfg, out_dir, assert_bands=args.assert_bands, plot=args.plot)
    except SkdvError as exc:
        _report_error(exc, out_dir)
        print(f"✗ {exc.kind}: {exc}")
        return exc.exit_code

    print()
    for name, ok in result.checks.items():
        print(f"  {'✓' if ok else '✗'} {name}")
    print()
    for path in result.files:
        print(f"* Saved: {path}")
    return 0


if __name__ == '__main__':
    sys.exit(main())
