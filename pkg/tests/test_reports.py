import json

import pandas as pd
import pytest

import generate_reference_tables
from harness import load_config, run, write_csv
from plot_reports import plot_directory
from verify_data import check_csv, load_schemas, verify_report_dir


@pytest.fixture(scope='module')
def simulate_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp('simulate')
    cfg = load_config(experiment='simulate',
                      overrides=['grid.nx=64', 'grid.L=25.132741228718345', 'time.T=0.01',
                                 'time.record_every=5'])
    run(cfg, out)
    return out


@pytest.fixture
def schemas():
    return load_schemas()


class TestVerify:
    def test_run_output_matches_schema(self, simulate_dir, schemas):
        results = verify_report_dir(simulate_dir, schemas)
        assert [name for name, _, _ in results] == ['trajectory.csv', 'summary.json', 'MANIFEST.json']
        assert all(ok for _, ok, _ in results)

    def test_missing_manifest(self, tmp_path, schemas):
        assert verify_report_dir(tmp_path, schemas) == [('MANIFEST.json', False, 'not found')]

    def test_unknown_experiment(self, tmp_path, schemas):
        (tmp_path / 'MANIFEST.json').write_text(json.dumps({'experiment': 'relax'}))
        (name, ok, _), = verify_report_dir(tmp_path, schemas)
        assert not ok

    def test_undocumented_column(self, tmp_path, schemas):
        path = write_csv(pd.DataFrame({'k': [1], 'sup_difference': [0.1], 'extra': [2]}),
                         tmp_path / 'picard.csv')
        ok, message = check_csv(path, schemas['csv']['picard.csv'])
        assert not ok
        assert 'extra' in message

    def test_missing_report_file(self, simulate_dir, tmp_path, schemas):
        for name in ('summary.json', 'MANIFEST.json'):
            (tmp_path / name).write_bytes((simulate_dir / name).read_bytes())
        results = dict((name, ok) for name, ok, _ in verify_report_dir(tmp_path, schemas))
        assert results == {'trajectory.csv': False, 'summary.json': True, 'MANIFEST.json': True}


class TestPlots:
    def test_simulate_figure(self, simulate_dir):
        saved = plot_directory(simulate_dir, 'simulate')
        assert [p.name for p in saved] == ['trajectory.png']
        assert saved[0].stat().st_size > 0

    def test_drift_figure(self, tmp_path):
        write_csv(pd.DataFrame({'N': [8, 16, 32], 'E0': [1.0] * 3, 'L0': [2.0] * 3,
                                'drift_E': [1e-3, 5e-4, 2e-4], 'drift_L': [1e-9, 2e-9, 1e-9],
                                'max_drift_E': [1e-3, 5e-4, 2e-4], 'max_drift_L': [1e-9] * 3}),
                  tmp_path / 'drift.csv')
        saved = plot_directory(tmp_path, 'invariants')
        assert saved == [tmp_path / 'drift.png']


class TestReferenceTables:
    def test_tables_from_reports(self, tmp_path, capsys):
        inflate = tmp_path / 'inflate'
        inflate.mkdir()
        write_csv(pd.DataFrame({'N': [32.1, 64.2, 128.3], 'k': [5000, 40000, 330000],
                                'G_total': [1e-4, 2e-4, 4e-4], 'G_at_1': [1e-4, 2e-4, 4e-4],
                                'G_nls_term': [1e-4, 2e-4, 4e-4], 'G_kdv_term': [1e-6, 1e-7, 1e-8],
                                'phase_min': [0.99, 0.99, 0.99],
                                'slope_so_far': [float('nan'), float('nan'), 1.0]}),
                  inflate / 'inflation.csv')
        (inflate / 'summary.json').write_text(json.dumps(
            {'slope': 1.0, 'stderr': 0.01, 'target_slope': 1.0, 'kdv_slope': -3.3}))
        counter = tmp_path / 'estimates'
        counter.mkdir()
        write_csv(pd.DataFrame({'N': [32.0, 64.0], 'ratio': [1.0, 2.0], 's': [0.0, 0.0],
                                'l': [1.0, 1.0]}), counter / 'counterexample.csv')

        assert generate_reference_tables.main([str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert out.startswith('# Schrodinger-KdV Experiment Reference Tables')
        assert '## Norm inflation (inflate)' in out
        assert 'Fitted slope 1.000 +/- 0.010 (target 1)' in out
        assert '## Counterexample family (estimates)' in out
        assert '| 0 | 1 | 64.0000 | 2.0000e+00 | 2.000 |' in out
        assert 'Almost-conservation drift' not in out
