#!/usr/bin/env python3
"""
Plot experiment reports (functional drift, Picard convergence, inflation and
counterexample scaling) from the CSVs written by the harness.

Status: Active
Usage: python scripts/plot_reports.py REPORT_DIR
Output: PNG figures saved next to the CSV reports in REPORT_DIR
"""

import json
import sys
from pathlib import Path
from typing import List

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
import seaborn as sns

# Plot styling
sns.set_style("whitegrid")
plt.rcParams['figure.figsize'] = (14, 8)
plt.rcParams['font.size'] = 10


class ReportPlotter:
    """Turn one report directory into figures."""

    def __init__(self, report_dir: Path):
        self.report_dir = Path(report_dir)
        self.saved: List[Path] = []

    def _save(self, fig, name: str) -> Path:
        path = self.report_dir / name
        fig.tight_layout()
        fig.savefig(path, dpi=300, bbox_inches='tight')
        plt.close(fig)
        print(f"* Saved: {path}")
        self.saved.append(path)
        return path

    def plot_simulate(self):
        df = pd.read_csv(self.report_dir / 'trajectory.csv')
        fig, axes = plt.subplots(1, 3, figsize=(16, 5))
        fig.suptitle('Conserved Quantities Along the Trajectory', fontsize=14, fontweight='bold')
        for ax, column in zip(axes, ['mass', 'L', 'E']):
            drift = np.abs(df[column] - df[column].iloc[0])
            ax.semilogy(df['t'], np.maximum(drift, 1e-18), linewidth=2)
            ax.set_xlabel('t', fontweight='bold')
            ax.set_ylabel(f'|{column}(t) - {column}(0)|', fontweight='bold')
            ax.grid(True, alpha=0.3)
        self._save(fig, 'trajectory.png')

    def plot_invariants(self):
        df = pd.read_csv(self.report_dir / 'drift.csv')
        fig, ax = plt.subplots(figsize=(8, 6))
        ax.loglog(df['N'], df['drift_E'], marker='o', linewidth=2.5, markersize=8,
                  color='#2E86AB', label='E_I drift')
        ax.loglog(df['N'], df['drift_L'], marker='s', linewidth=2.5, markersize=8,
                  color='#A23B72', label='L_I drift')
        ax.set_xlabel('N', fontweight='bold')
        ax.set_ylabel('|F(delta) - F(0)|', fontweight='bold')
        ax.set_title('Almost-Conservation Drift vs Multiplier Cutoff')
        ax.legend()
        self._save(fig, 'drift.png')

    def plot_picard(self):
        df = pd.read_csv(self.report_dir / 'picard.csv')
        fig, ax = plt.subplots(figsize=(8, 6))
        ax.semilogy(df['k'], df['sup_difference'], marker='o', linewidth=2.5, markersize=8)
        ax.set_xlabel('iteration k', fontweight='bold')
        ax.set_ylabel('sup |iterate(k) - iterate(k-1)|', fontweight='bold')
        ax.set_title('Picard Iteration Convergence')
        self._save(fig, 'picard.png')

    def plot_inflate(self):
        df = pd.read_csv(self.report_dir / 'inflation.csv')
        with open(self.report_dir / 'summary.json') as f:
            summary = json.load(f)
        fig, ax = plt.subplots(figsize=(8, 6))
        ax.loglog(df['N'], df['G_total'], marker='o', linewidth=2.5, markersize=8,
                  color='#2E86AB', label=f"G(N), slope {summary['slope']:.3f}")
        ax.loglog(df['N'], df['G_kdv_term'], marker='s', linewidth=2.5, markersize=8,
                  color='#A23B72', label=f"KdV term, slope {summary['kdv_slope']:.3f}")
        ax.set_xlabel('N', fontweight='bold')
        ax.set_ylabel('norm', fontweight='bold')
        ax.set_title(f"Second-Iterate Norm Inflation (target slope {summary['target_slope']:g})")
        ax.legend()
        self._save(fig, 'inflation.png')

    def plot_estimates(self):
        ens = pd.read_csv(self.report_dir / 'ensemble.csv')
        counter = pd.read_csv(self.report_dir / 'counterexample.csv')
        fig, axes = plt.subplots(1, 2, figsize=(14, 5))
        ax = axes[0]
        sns.boxplot(data=ens, x='case', y='ratio', ax=ax, color='#2E86AB')
        ax.set_xlabel('case', fontweight='bold')
        ax.set_ylabel('LHS / RHS', fontweight='bold')
        ax.set_title('Localized Ensemble Ratios')
        ax.tick_params(axis='x', labelrotation=20)

        ax = axes[1]
        for (s, l), group in counter.groupby(['s', 'l']):
            ax.loglog(group['N'], group['ratio'], marker='o', linewidth=2.5, markersize=7,
                      label=f's={s:g}, l={l:g}')
        ax.set_xlabel('N', fontweight='bold')
        ax.set_ylabel('ratio', fontweight='bold')
        ax.set_title('Counterexample Family')
        ax.legend()
        self._save(fig, 'estimates.png')


def plot_directory(report_dir: Path, experiment: str) -> List[Path]:
    plotter = ReportPlotter(report_dir)
    getattr(plotter, f'plot_{experiment}')()
    return plotter.saved


def main(argv: List[str]) -> int:
    if len(argv) != 1:
        print("Usage: python scripts/plot_reports.py REPORT_DIR")
        return 2
    report_dir = Path(argv[0])
    with open(report_dir / 'MANIFEST.json') as f:
        experiment = json.load(f)['experiment']
    plot_directory(report_dir, experiment)
    return 0


if __name__ == '__main__':
    sys.exit(main(sys.argv[1:]))
