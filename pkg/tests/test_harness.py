import json

import pandas as pd
import pytest

import harness
from errors import AcceptanceBandError, ConfigValidationError, InvalidInputError
from harness import (EXPERIMENTS, load_config, parse_config_text, run, validate_config,
                     worker_count, write_csv, write_json)
from verify_data import load_schemas, verify_report_dir

SMALL_SIMULATE = ['grid.nx=64', 'grid.L=25.132741228718345', 'time.T=0.01',
                  'time.dt=1e-3', 'time.record_every=5']


class TestConfig:
    def test_parse_dotted_keys(self):
        tree = parse_config_text("""
            experiment = simulate   # trailing comment
            grid.nx = 64
            multiplier.N = [8, 16]
            estimates.kind = trilinear
        """)
        assert tree == {'experiment': 'simulate', 'grid': {'nx': 64},
                        'multiplier': {'N': [8, 16]}, 'estimates': {'kind': 'trilinear'}}

    def test_line_without_assignment(self):
        with pytest.raises(ConfigValidationError):
            parse_config_text('grid.nx 64')

    def test_value_used_as_section(self):
        with pytest.raises(ConfigValidationError) as info:
            parse_config_text('grid = 3\ngrid.nx = 64')
        assert info.value.fields == ['grid.nx']

    @pytest.mark.parametrize('override, field', [
        ('time.dt=-1', 'time.dt'),
        ('grid.nx=100', 'grid.nx'),
        ('grid.spacing=2', 'grid.spacing'),
        ('estimates.kind="quadrilinear"', 'estimates.kind'),
    ])
    def test_invalid_values_name_their_field(self, override, field):
        with pytest.raises(ConfigValidationError) as info:
            load_config(experiment='simulate', overrides=[override])
        assert field in info.value.fields
        assert info.value.exit_code == 2
        assert info.value.to_dict()['fields'] == info.value.fields

    def test_malformed_override(self):
        with pytest.raises(ConfigValidationError):
            load_config(experiment='simulate', overrides=['time.dt'])

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigValidationError):
            load_config(tmp_path / 'nope.cfg')

    def test_experiment_required(self):
        with pytest.raises(ConfigValidationError) as info:
            validate_config({})
        assert 'experiment' in info.value.fields

    @pytest.mark.parametrize('experiment', EXPERIMENTS)
    def test_default_configs_load(self, experiment):
        cfg = load_config(experiment=experiment)
        assert cfg.experiment == experiment
        assert cfg.make_grid().nx == cfg.grid.nx

    def test_overrides_change_the_hash(self):
        a = load_config(experiment='simulate')
        b = load_config(experiment='simulate', overrides=['time.T=1.0'])
        assert a.sha256() == load_config(experiment='simulate').sha256()
        assert a.sha256() != b.sha256()
        assert b.time.T == 1.0


class TestReports:
    def test_worker_count(self, monkeypatch):
        monkeypatch.setenv('SKDV_THREADS', '3')
        assert worker_count() == 3
        monkeypatch.setenv('SKDV_THREADS', '0')
        assert worker_count() == 1
        monkeypatch.setenv('SKDV_THREADS', 'many')
        with pytest.raises(InvalidInputError):
            worker_count()
        monkeypatch.delenv('SKDV_THREADS')
        assert worker_count() >= 1

    def test_csv_keeps_full_precision(self, tmp_path):
        value = 0.1 + 0.2
        path = write_csv(pd.DataFrame({'x': [value]}), tmp_path / 'x.csv')
        assert path.read_bytes() == b'x\n0.30000000000000004\n'
        assert pd.read_csv(path, float_precision='round_trip')['x'].iloc[0] == value

    def test_json_nulls_non_finite(self, tmp_path):
        path = write_json({'a': float('nan'), 'b': [1, float('inf')], 'ok': True}, tmp_path / 'x.json')
        assert json.loads(path.read_text()) == {'a': None, 'b': [1, None], 'ok': True}


class TestRun:
    def test_simulate_is_reproducible(self, tmp_path):
        cfg = load_config(experiment='simulate', overrides=SMALL_SIMULATE)
        first = run(cfg, tmp_path / 'a')
        second = run(cfg, tmp_path / 'b')
        assert first.passed
        for name in ('trajectory.csv', 'summary.json'):
            assert (tmp_path / 'a' / name).read_bytes() == (tmp_path / 'b' / name).read_bytes()
        frame = pd.read_csv(tmp_path / 'a' / 'trajectory.csv')
        assert list(frame.columns) == ['t', 'mass', 'L', 'E']
        assert len(frame) == 3
        assert all(ok for _, ok, _ in verify_report_dir(tmp_path / 'a', load_schemas()))
        assert second.summary['mass_drift'] == first.summary['mass_drift']

    def test_manifest(self, tmp_path):
        cfg = load_config(experiment='simulate', overrides=SMALL_SIMULATE)
        run(cfg, tmp_path)
        manifest = json.loads((tmp_path / 'MANIFEST.json').read_text())
        assert manifest['config_sha256'] == cfg.sha256()
        assert manifest['exit_code'] == 0
        assert manifest['files'] == ['trajectory.csv', 'summary.json']
        assert manifest['run_utc'].endswith('Z')
        assert set(manifest['versions']) >= {'python', 'numpy', 'scipy', 'pandas'}

    def test_missed_band(self, tmp_path, monkeypatch):
        def failing(cfg, out_dir, pool):
            return {'note': 'forced'}, {'always_fails': False}, []

        monkeypatch.setitem(harness.RUNNERS, 'simulate', failing)
        cfg = load_config(experiment='simulate', overrides=SMALL_SIMULATE)
        result = run(cfg, tmp_path / 'soft')
        assert not result.passed
        assert json.loads((tmp_path / 'soft' / 'MANIFEST.json').read_text())['exit_code'] == 0

        with pytest.raises(AcceptanceBandError) as info:
            run(cfg, tmp_path / 'strict', assert_bands=True)
        assert info.value.exit_code == 4
        assert 'always_fails' in str(info.value)
        manifest = json.loads((tmp_path / 'strict' / 'MANIFEST.json').read_text())
        assert manifest['exit_code'] == 4
        summary = json.loads((tmp_path / 'strict' / 'summary.json').read_text())
        assert summary['checks'] == {'always_fails': False}

    def test_default_inflate_run_meets_its_bands(self, tmp_path):
        result = run(load_config(experiment='inflate'), tmp_path, assert_bands=True)
        assert result.passed
        assert set(result.checks) == {'slope_within_0.3_of_target', 'kdv_slope_decays',
                                      'phase_coherent'}
        assert (tmp_path / 'inflation.csv').exists()

    def test_output_dir_from_config(self, tmp_path):
        cfg = load_config(experiment='simulate',
                          overrides=SMALL_SIMULATE + [f'output_dir="{tmp_path / "cfg_out"}"'])
        result = run(cfg)
        assert result.out_dir == tmp_path / 'cfg_out'
        assert (tmp_path / 'cfg_out' / 'summary.json').exists()

    @pytest.mark.slow
    @pytest.mark.parametrize('experiment', EXPERIMENTS)
    def test_default_runs_meet_their_bands(self, experiment, tmp_path):
        assert run(load_config(experiment=experiment), tmp_path, assert_bands=True).passed
