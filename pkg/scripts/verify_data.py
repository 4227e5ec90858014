#!/usr/bin/env python3
"""
Verify experiment report directories against the documented report schemas.

Status: Active
Usage: python scripts/verify_data.py [REPORT_DIR ...]   (default: every directory in `outputs/`)
Output: Console verification of CSV / JSON reports; exit status 1 if any check fails
"""

import json
import sys
from pathlib import Path
from typing import Dict, List, Tuple

import pandas as pd

ROOT = Path(__file__).parent.parent
DATA_DIR = ROOT / 'data'
OUTPUT_DIR = ROOT / 'outputs'


def load_schemas(path: Path = DATA_DIR / 'report_schemas.json') -> Dict:
    with open(path, 'r') as f:
        return json.load(f)


def check_csv(path: Path, schema: Dict) -> Tuple[bool, str]:
    df = pd.read_csv(path)
    missing = [c for c in schema['columns'] if c not in df.columns]
    if missing:
        return False, f"missing columns {missing}"
    extra = [c for c in df.columns if c not in schema['columns']]
    if extra:
        return False, f"undocumented columns {extra}"
    if df.empty:
        return False, "no rows"
    for column in schema.get('numeric', []):
        if not pd.api.types.is_numeric_dtype(df[column]):
            return False, f"column {column!r} is not numeric"
    return True, f"{len(df)} rows"


def check_json(path: Path, keys: List[str]) -> Tuple[bool, str]:
    with open(path, 'r') as f:
        payload = json.load(f)
    missing = [k for k in keys if k not in payload]
    if missing:
        return False, f"missing keys {missing}"
    return True, f"{len(payload)} keys"


def verify_report_dir(report_dir: Path, schemas: Dict) -> List[Tuple[str, bool, str]]:
    """One (file, ok, message) entry per expected report file."""
    results = []
    manifest_path = report_dir / 'MANIFEST.json'
    if not manifest_path.exists():
        return [('MANIFEST.json', False, 'not found')]
    experiment = json.load(open(manifest_path)).get('experiment')
    expected = schemas['experiments'].get(experiment)
    if expected is None:
        return [('MANIFEST.json', False, f"unknown experiment {experiment!r}")]

    for name in expected:
        path = report_dir / name
        if not path.exists():
            results.append((name, False, 'not found'))
            continue
        try:
            if name == 'MANIFEST.json':
                ok, message = check_json(path, schemas['manifest_keys'])
            elif name == 'summary.json':
                ok, message = check_json(path, schemas['summary_keys'])
            else:
                ok, message = check_csv(path, schemas['csv'][name])
        except Exception as e:
            ok, message = False, str(e)
        results.append((name, ok, message))
    return results


def main(argv: List[str]) -> int:
    schemas = load_schemas()
    dirs = [Path(a) for a in argv] or sorted(p for p in OUTPUT_DIR.glob('*') if p.is_dir())

    print('\n' + '=' * 60)
    print('REPORT VERIFICATION')
    print('=' * 60 + '\n')

    failures = 0
    for report_dir in dirs:
        print(f'{report_dir}:')
        for name, ok, message in verify_report_dir(report_dir, schemas):
            print(f"  {'✓' if ok else '✗'} {name}: {message}")
            failures += 0 if ok else 1

    print('\n' + '=' * 60)
    if failures:
        print(f'✗ {failures} report check(s) failed')
    else:
        print('✓ All reports match their schemas')
    print('=' * 60 + '\n')
    return 1 if failures else 0


if __name__ == '__main__':
    sys.exit(main(sys.argv[1:]))
