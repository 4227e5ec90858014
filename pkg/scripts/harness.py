"""
Experiment harness: configuration, dispatch, reports and run manifests.

Status: Active (library; driven by scripts/skdv.py)

Configuration files are flat `key = value` text with dotted section names:

    experiment = simulate
    grid.nx = 512
    params.gamma = 1.0      # comments are allowed

Values are read as JSON literals when possible (numbers, booleans, lists) and
as strings otherwise. The resulting nested dict is validated by ExperimentConfig;
unknown keys are rejected.
"""

import datetime
import hashlib
import json
import logging
import math
import os
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Literal, Optional, Tuple

import numpy as np
import pandas as pd
import pydantic
import scipy
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from duhamel import (inflation_experiment, picard_contraction_probe, picard_iterate,
                     solver_agreement)
from errors import AcceptanceBandError, ConfigValidationError, InvalidInputError
from estimates import (EstimateCase, EstimateKind, counterexample_sweep, ensemble,
                       ensemble_summary)
from invariants import (almost_conservation_run, choose_energy_variant, functional_E,
                        functional_L, functional_report, mass)
from propagators import SolverConfig, SystemParams, evolve, gaussian_data
from spectral import Grid, MultiplierSpec

logger = logging.getLogger(__name__)

ROOT = Path(__file__).parent.parent
CONFIG_DIR = ROOT / 'data' / 'configs'
OUTPUT_DIR = ROOT / 'outputs'

EXPERIMENTS = ('simulate', 'invariants', 'picard', 'inflate', 'estimates')


# ---------------------------------------------------------------------------
# configuration model
# ---------------------------------------------------------------------------

class _Section(BaseModel):
    model_config = ConfigDict(extra='forbid')


class GridSection(_Section):
    nx: int = 512
    L: float = Field(default=32 * math.pi, gt=0)

    @field_validator('nx')
    @classmethod
    def _power_of_two(cls, value: int) -> int:
        if value < 8 or value & (value - 1):
            raise ValueError('nx must be a power of two >= 8')
        return value


class TimeSection(_Section):
    dt: float = Field(default=1e-3, gt=0)
    T: float = Field(default=5.0, ge=0)
    delta: float = Field(default=0.25, gt=0)
    record_every: int = Field(default=100, ge=1)


class ParamsSection(_Section):
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    s: float = 0.0
    l: float = 0.0


class MultiplierSection(_Section):
    N: List[float] = Field(default_factory=lambda: [8.0, 16.0, 32.0, 64.0])
    s: float = Field(default=0.5, lt=1)

    @field_validator('N')
    @classmethod
    def _cutoffs(cls, value: List[float]) -> List[float]:
        if not value or any(n < 2 for n in value):
            raise ValueError('multiplier cutoffs must be a non-empty list of values >= 2')
        return value


class DataSection(_Section):
    amplitude_u: float = 1.0
    amplitude_v: float = 1.0
    width: float = Field(default=1.0, gt=0)
    wavenumber: float = 0.0


class PicardSection(_Section):
    iterations: int = Field(default=8, ge=1)
    nt: int = Field(default=256, ge=8)
    substeps: int = Field(default=8, ge=1)
    delta_list: List[float] = Field(default_factory=lambda: [0.0625, 0.125, 0.25, 0.5, 1.0])
    amplitudes: List[float] = Field(default_factory=lambda: [0.5, 1.0, 2.0, 4.0])
    probe_iterations: int = Field(default=6, ge=2)
    probe_nt: int = Field(default=128, ge=8)


class InflationSection(_Section):
    s: float = 0.0
    l: float = 1.0
    N: List[float] = Field(default_factory=lambda: [32.0, 64.0, 128.0, 256.0, 512.0], min_length=3)
    eps0: float = Field(default=1e-2, gt=0)
    n: float = Field(default=6.0, gt=0)
    quad_points: int = Field(default=64, ge=2)
    conv_points: int = Field(default=128, ge=2)


class EstimatesSection(_Section):
    kind: EstimateKind = EstimateKind.SCHRODINGER_PRODUCT
    s: float = 0.0
    l: float = -0.5
    b: float = Field(default=0.51, gt=0, lt=1)
    b_prime: float = Field(default=0.51, gt=0, lt=1)
    c: float = Field(default=0.51, gt=0, lt=1)
    c_prime: float = Field(default=0.51, gt=0, lt=1)
    nx: List[int] = Field(default_factory=lambda: [128, 256, 512])
    nt: int = Field(default=256, ge=8)
    L: float = Field(default=4 * math.pi, gt=0)
    T: float = Field(default=8.0, gt=0)
    samples: int = Field(default=50, ge=1)
    counterexample_N: List[float] = Field(default_factory=lambda: [32.0, 64.0, 128.0, 256.0, 512.0])
    counterexample_s: float = 0.0
    counterexample_l: float = 1.0


class ExperimentConfig(_Section):
    experiment: Literal['simulate', 'invariants', 'picard', 'inflate', 'estimates']
    seed: int = 0
    output_dir: Optional[str] = None
    grid: GridSection = Field(default_factory=GridSection)
    time: TimeSection = Field(default_factory=TimeSection)
    params: ParamsSection = Field(default_factory=ParamsSection)
    multiplier: MultiplierSection = Field(default_factory=MultiplierSection)
    data: DataSection = Field(default_factory=DataSection)
    picard: PicardSection = Field(default_factory=PicardSection)
    inflation: InflationSection = Field(default_factory=InflationSection)
    estimates: EstimatesSection = Field(default_factory=EstimatesSection)

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode='json'), sort_keys=True, separators=(',', ':'))

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical_json().encode('utf-8')).hexdigest()

    def system_params(self) -> SystemParams:
        return SystemParams(**self.params.model_dump())

    def make_grid(self) -> Grid:
        return Grid(self.grid.nx, self.grid.L)


def _parse_value(raw: str) -> Any:
    raw = raw.strip()
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _assign(tree: Dict[str, Any], dotted: str, value: Any) -> None:
    keys = dotted.strip().split('.')
    node = tree
    for key in keys[:-1]:
        child = node.setdefault(key, {})
        if not isinstance(child, dict):
            raise ConfigValidationError(f"'{key}' is a value, not a section", fields=[dotted.strip()])
        node = child
    node[keys[-1]] = value


def parse_config_text(text: str) -> Dict[str, Any]:
    """Flat dotted `key = value` lines -> nested dict."""
    tree: Dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigValidationError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = line.split('=', 1)
        _assign(tree, key, _parse_value(raw))
    return tree


def apply_overrides(tree: Dict[str, Any], overrides: Iterable[str]) -> Dict[str, Any]:
    for item in overrides:
        if '=' not in item:
            raise ConfigValidationError(f"override must look like key=value, got {item!r}")
        key, raw = item.split('=', 1)
        _assign(tree, key, _parse_value(raw))
    return tree


def validate_config(tree: Dict[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(tree)
    except ValidationError as exc:
        fields = ['.'.join(str(part) for part in err['loc']) for err in exc.errors()]
        details = '; '.join(f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in exc.errors())
        raise ConfigValidationError(f"invalid configuration ({details})", fields=fields) from exc


def load_config(path: Optional[Path] = None, overrides: Iterable[str] = (),
                experiment: Optional[str] = None) -> ExperimentConfig:
    """Read a config file (or the experiment's default), apply overrides, validate."""
    if path is None and experiment is not None:
        path = CONFIG_DIR / f'{experiment}.cfg'
    tree: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigValidationError(f"config file not found: {path}", fields=['config'])
        tree = parse_config_text(path.read_text())
    if experiment is not None:
        tree['experiment'] = experiment
    apply_overrides(tree, overrides)
    return validate_config(tree)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

def worker_count() -> int:
    raw = os.environ.get('SKDV_THREADS')
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise InvalidInputError(f"SKDV_THREADS must be an integer, got {raw!r}")
    return os.cpu_count() or 1


def write_csv(df: pd.DataFrame, path: Path) -> Path:
    df.to_csv(path, index=False, float_format='%.17g', lineterminator='\n')
    return path


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def write_json(payload: Dict[str, Any], path: Path) -> Path:
    with open(path, 'w') as f:
        json.dump(_jsonable(payload), f, indent=2, sort_keys=True)
        f.write('\n')
    return path


def _run_utc_iso() -> str:
    now = datetime.datetime.now(datetime.timezone.utc).replace(microsecond=0)
    return now.isoformat().replace('+00:00', 'Z')


def package_versions() -> Dict[str, str]:
    return {
        'python': platform.python_version(),
        'numpy': np.__version__,
        'scipy': scipy.__version__,
        'pandas': pd.__version__,
        'pydantic': pydantic.VERSION,
    }


@dataclass
class RunResult:
    experiment: str
    out_dir: Path
    summary: Dict[str, Any]
    checks: Dict[str, bool]
    files: List[Path] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def _initial_state(cfg: ExperimentConfig):
    d = cfg.data
    return gaussian_data(cfg.make_grid(), d.amplitude_u, d.amplitude_v, d.width, d.wavenumber)


def run_simulate(cfg: ExperimentConfig, out_dir: Path, pool) -> Tuple[Dict, Dict, List[Path]]:
    p = cfg.system_params()
    state = _initial_state(cfg)
    observers = {
        'mass': lambda st: mass(st.u),
        'L': lambda st: functional_L(st.u, st.v, p),
        'E': lambda st: functional_E(st.u, st.v, p),
    }
    solver = SolverConfig(dt=cfg.time.dt, record_every=cfg.time.record_every)
    trajectory = evolve(state, cfg.time.T, solver, p, observers)
    frame = trajectory.to_frame()
    m = np.array(trajectory.observers['mass'])
    mass_drift = float(np.max(np.abs(m - m[0])) / m[0]) if m[0] > 0 else 0.0
    summary = {
        'mass_drift': mass_drift,
        'samples': len(trajectory.times),
        'T': cfg.time.T,
        'dt': cfg.time.dt,
        'max_imag_residue': trajectory.max_imag_residue,
    }
    checks = {'mass_drift_below_1e-8': mass_drift < 1e-8}
    files = [write_csv(frame, out_dir / 'trajectory.csv')]
    return summary, checks, files


def run_invariants(cfg: ExperimentConfig, out_dir: Path, pool) -> Tuple[Dict, Dict, List[Path]]:
    p = cfg.system_params()
    state = _initial_state(cfg)
    solver = SolverConfig(dt=cfg.time.dt, record_every=cfg.time.record_every)

    oracle = evolve(state, cfg.time.T, solver, p)
    variant, variant_drifts = choose_energy_variant(oracle, p)
    L_drift = functional_report(oracle, p, None, variant).relative_drift('L')

    multipliers = [MultiplierSpec(N, cfg.multiplier.s) for N in cfg.multiplier.N]
    mapper = pool.map if pool is not None else None
    table = almost_conservation_run(state, p, multipliers, cfg.time.delta, solver, variant, mapper)
    functionals = pd.concat([r.to_frame() for r in table.reports], ignore_index=True)

    conserved = [v for v, d in variant_drifts.items() if d < 1e-6]
    summary = {
        'energy_variant': variant,
        'variant_drifts': variant_drifts,
        'L_drift': L_drift,
        'drift_E': table.drift_E(),
        'N': [r.N for r in table.reports],
        'drift_E_nonincreasing': table.nonincreasing(),
    }
    checks = {
        'one_conserved_energy_variant': len(conserved) == 1,
        'L_drift_below_1e-8': L_drift < 1e-8,
        'drift_E_nonincreasing': table.nonincreasing(),
    }
    files = [write_csv(functionals, out_dir / 'functionals.csv'),
             write_csv(table.to_frame(), out_dir / 'drift.csv')]
    return summary, checks, files


def run_picard(cfg: ExperimentConfig, out_dir: Path, pool) -> Tuple[Dict, Dict, List[Path]]:
    p = cfg.system_params()
    state = _initial_state(cfg)
    pc = cfg.picard
    run = picard_iterate(state, p, cfg.time.delta, pc.iterations, pc.nt)
    agreement = solver_agreement(run, state, p, pc.substeps)
    probe = picard_contraction_probe(state, p, pc.delta_list, pc.amplitudes,
                                     pc.probe_iterations, pc.probe_nt)
    summary = {
        'delta': cfg.time.delta,
        'iterations': pc.iterations,
        'solver_difference': agreement,
        'final_difference': run.differences[-1],
        'critical_delta': {str(a): d for a, d in probe.critical.items()},
        'fitted_power': probe.fit.slope if probe.fit else None,
        'monotone': probe.is_monotone(),
        'inconclusive': probe.inconclusive,
    }
    checks = {'solver_difference_below_1e-6': agreement < 1e-6,
              'probe_monotone': probe.is_monotone()}
    files = [write_csv(run.to_frame(), out_dir / 'picard.csv'),
             write_csv(probe.to_frame(), out_dir / 'probe.csv')]
    return summary, checks, files


def run_inflate(cfg: ExperimentConfig, out_dir: Path, pool) -> Tuple[Dict, Dict, List[Path]]:
    inf = cfg.inflation
    p = SystemParams(alpha=cfg.params.alpha, beta=cfg.params.beta, gamma=cfg.params.gamma,
                     s=inf.s, l=inf.l)
    report = inflation_experiment(inf.s, inf.l, inf.N, inf.eps0, inf.n,
                                  inf.quad_points, inf.conv_points, p,
                                  mapper=pool.map if pool is not None else None)
    summary = report.summary()
    summary['fit'] = report.fit.to_dict()
    summary['kdv_fit'] = report.kdv_fit.to_dict()
    target = inf.l - 4 * inf.s
    checks = {
        'slope_within_0.3_of_target': abs(report.fit.slope - target) <= 0.3,
        'kdv_slope_decays': report.kdv_fit.slope <= -inf.n / 2 + 0.5,
        'phase_coherent': report.phase_min > 0.5,
    }
    files = [write_csv(report.to_frame(), out_dir / 'inflation.csv')]
    return summary, checks, files


def run_estimates(cfg: ExperimentConfig, out_dir: Path, pool) -> Tuple[Dict, Dict, List[Path]]:
    est = cfg.estimates
    base = EstimateCase(kind=est.kind, s=est.s, l=est.l, b=est.b, b_prime=est.b_prime,
                        c=est.c, c_prime=est.c_prime, nx=est.nx[0], nt=est.nt, L=est.L, T=est.T)
    mapper = pool.map if pool is not None else None
    frames, per_resolution = [], {}
    for nx in est.nx:
        frame = ensemble(base.with_resolution(nx), est.samples, cfg.seed, mapper)
        frames.append(frame)
        per_resolution[str(nx)] = ensemble_summary(frame)
    maxima = [v['max_ratio'] for v in per_resolution.values()]
    spread = max(maxima) / min(maxima) if min(maxima) > 0 else float('inf')

    growth_case = EstimateCase(kind=EstimateKind.KDV_OUTPUT, s=est.counterexample_s,
                               l=est.counterexample_l, b=est.b, c_prime=est.c_prime)
    contrast_case = EstimateCase(kind=EstimateKind.KDV_OUTPUT, s=est.s, l=est.l,
                                 b=est.b, c_prime=est.c_prime)
    growth = counterexample_sweep(growth_case, est.counterexample_N)
    contrast = counterexample_sweep(contrast_case, est.counterexample_N)
    counter = pd.concat([growth.to_frame().assign(s=growth_case.s, l=growth_case.l),
                         contrast.to_frame().assign(s=contrast_case.s, l=contrast_case.l)],
                        ignore_index=True)

    summary = {
        'per_resolution': per_resolution,
        'max_ratio_spread': spread,
        'growth_factors': growth.growth_factors(),
        'growth_exponent': growth.fit.slope if growth.fit else None,
        'contrast_ratios': contrast.ratios(),
        'contrast_bounded': contrast.bounded(),
    }
    checks = {'ensemble_stable_within_2x': spread < 2.0, 'contrast_bounded': contrast.bounded()}
    if growth_case.l > 4 * growth_case.s:
        checks['counterexample_grows_1.5x'] = min(growth.growth_factors()) >= 1.5
    files = [write_csv(pd.concat(frames, ignore_index=True), out_dir / 'ensemble.csv'),
             write_csv(counter, out_dir / 'counterexample.csv')]
    return summary, checks, files


RUNNERS: Dict[str, Callable] = {
    'simulate': run_simulate,
    'invariants': run_invariants,
    'picard': run_picard,
    'inflate': run_inflate,
    'estimates': run_estimates,
}


def resolve_output_dir(cfg: ExperimentConfig, out: Optional[Path] = None) -> Path:
    if out is not None:
        return Path(out)
    if cfg.output_dir:
        return Path(cfg.output_dir)
    return OUTPUT_DIR / cfg.experiment


def write_manifest(cfg: ExperimentConfig, out_dir: Path, files: List[Path], exit_code: int) -> Path:
    manifest = {
        'experiment': cfg.experiment,
        'config_sha256': cfg.sha256(),
        'config': cfg.model_dump(mode='json'),
        'seed': cfg.seed,
        'versions': package_versions(),
        'run_utc': _run_utc_iso(),
        'files': [f.name for f in files],
        'exit_code': exit_code,
    }
    return write_json(manifest, out_dir / 'MANIFEST.json')


def run(cfg: ExperimentConfig, out: Optional[Path] = None, assert_bands: bool = False,
        plot: bool = False) -> RunResult:
    """Run the configured experiment and write its reports, summary and MANIFEST.

    With assert_bands, a missed acceptance band raises AcceptanceBandError after
    every report has been written.
    """
    out_dir = resolve_output_dir(cfg, out)
    out_dir.mkdir(parents=True, exist_ok=True)
    logger.info("running %s into %s (config %s)", cfg.experiment, out_dir, cfg.sha256()[:12])

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        summary, checks, files = RUNNERS[cfg.experiment](cfg, out_dir, pool)

    summary = {'experiment': cfg.experiment, 'checks': checks, **summary}
    files.append(write_json(summary, out_dir / 'summary.json'))
    if plot:
        from plot_reports import plot_directory
        files.extend(plot_directory(out_dir, cfg.experiment))

    result = RunResult(cfg.experiment, out_dir, summary, checks, files)
    exit_code = 4 if (assert_bands and not result.passed) else 0
    write_manifest(cfg, out_dir, files, exit_code)
    if exit_code:
        missed = [name for name, ok in checks.items() if not ok]
        raise AcceptanceBandError(f"{cfg.experiment}: acceptance bands missed: {', '.join(missed)}")
    return result
