#!/usr/bin/env python3
"""
Generate quick reference tables from experiment reports - markdown export.

Status: Active
Usage: python scripts/generate_reference_tables.py [OUTPUT_DIR]
Output: Markdown tables printed to stdout (inflation scaling, drift sweep,
        counterexample growth) for every report found under OUTPUT_DIR
"""

import json
import sys
from pathlib import Path
from typing import Dict, Optional

import pandas as pd

ROOT = Path(__file__).parent.parent
OUTPUT_DIR = ROOT / 'outputs'


def _load(report_dir: Path, name: str) -> Optional[pd.DataFrame]:
    path = report_dir / name
    return pd.read_csv(path) if path.exists() else None


def _summary(report_dir: Path) -> Dict:
    path = report_dir / 'summary.json'
    if not path.exists():
        return {}
    with open(path, 'r') as f:
        return json.load(f)


def inflation_table(df: pd.DataFrame, summary: Dict) -> str:
    lines = ["| N | k | G(N) | G at t=1 | KdV term | min Re(phase) | slope so far |",
             "|---|---|------|----------|----------|---------------|--------------|"]
    for _, row in df.iterrows():
        slope = '-' if pd.isna(row['slope_so_far']) else f"{row['slope_so_far']:.3f}"
        lines.append(f"| {row['N']:.4f} | {int(row['k'])} | {row['G_total']:.4e} | {row['G_at_1']:.4e} "
                     f"| {row['G_kdv_term']:.4e} | {row['phase_min']:.4f} | {slope} |")
    if summary:
        lines.append("")
        lines.append(f"Fitted slope {summary['slope']:.3f} +/- {summary['stderr']:.3f} "
                     f"(target {summary['target_slope']:g}); KdV slope {summary['kdv_slope']:.3f}")
    return "\n".join(lines)


def drift_table(df: pd.DataFrame) -> str:
    lines = ["| N | E_I(0) | drift E_I | L_I(0) | drift L_I |",
             "|---|--------|-----------|--------|-----------|"]
    for _, row in df.iterrows():
        lines.append(f"| {row['N']:g} | {row['E0']:.6e} | {row['drift_E']:.3e} "
                     f"| {row['L0']:.6e} | {row['drift_L']:.3e} |")
    return "\n".join(lines)


def counterexample_table(df: pd.DataFrame) -> str:
    lines = ["| s | l | N | ratio | growth vs previous N |",
             "|---|---|---|-------|----------------------|"]
    for (s, l), group in df.groupby(['s', 'l']):
        previous = None
        for _, row in group.iterrows():
            growth = '-' if previous is None else f"{row['ratio'] / previous:.3f}"
            lines.append(f"| {s:g} | {l:g} | {row['N']:.4f} | {row['ratio']:.4e} | {growth} |")
            previous = row['ratio']
    return "\n".join(lines)


def main(argv) -> int:
    root = Path(argv[0]) if argv else OUTPUT_DIR
    print("# Schrodinger-KdV Experiment Reference Tables")

    for report_dir in sorted(p for p in root.glob('*') if p.is_dir()):
        summary = _summary(report_dir)
        inflation = _load(report_dir, 'inflation.csv')
        if inflation is not None:
            print(f"\n## Norm inflation ({report_dir.name})\n")
            print(inflation_table(inflation, summary))
        drift = _load(report_dir, 'drift.csv')
        if drift is not None:
            print(f"\n## Almost-conservation drift ({report_dir.name})\n")
            print(drift_table(drift))
            if summary:
                print(f"\nConserved energy variant: {summary.get('energy_variant')}")
        counter = _load(report_dir, 'counterexample.csv')
        if counter is not None:
            print(f"\n## Counterexample family ({report_dir.name})\n")
            print(counterexample_table(counter))

    print("\n---")
    print("\n**Notes:**")
    print("- N values are snapped so that (N - 1/2)^3 is a multiple of 2 pi")
    print("- Slopes are least-squares fits of log norm against log N")
    print("\nSee `docs/conventions.md` for transform and norm conventions.")
    return 0


if __name__ == '__main__':
    sys.exit(main(sys.argv[1:]))
