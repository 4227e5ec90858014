"""
Duhamel machinery: the Picard maps of the local theory and the semi-analytic
second iterate A_2 behind the norm-inflation experiment.

Status: Active (library)

Picard maps on a space-time lattice covering [-2 delta, 2 delta]:
    Phi_1 = psi(t) S(t) u0 - i psi(t) int_0^t S(t-t') psi(t'/delta) [alpha u v + beta |u|^2 u] dt'
    Phi_2 = psi(t) W(t) v0 + psi(t) int_0^t W(t-t') psi(t'/delta) [gamma (|u|^2)_x - (v^2)_x / 2] dt'

Second iterate, in continuous frequency (never on the FFT lattice):
    F[A_2](xi, t) = i xi e^{i t xi^3} [ gamma int K(Q1) u0_hat(xi - xi2) u0_hat(xi2) dxi2
                                       - 1/2 int K(Q2) v0_hat(xi - xi2) v0_hat(xi2) dxi2 ]
    K(Q, t) = (1 - e^{-i t Q}) / (i Q),  Q1 = xi (xi^2 + xi - 2 xi2),  Q2 = 3 xi (xi - xi2) xi2

All box arithmetic is done in offsets from box centres; the boxes get as narrow
as N^{-n} and would not survive absolute coordinates in double precision.
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache, partial
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.integrate import cumulative_simpson

from errors import FitError, InvalidInputError, ResolutionError, WindowError
from fitting import FitResult, fit_loglog
from propagators import SolverConfig, SystemParams, SystemState, evolve
from spectral import (ComplexField, Dispersion, Grid, RealField, SpaceTimeField,
                      japanese, psi)

logger = logging.getLogger(__name__)

MIN_POINTS_PER_DELTA = 16
SERIES_THRESHOLD = 1e-6
CONVERGED_FLOOR = 1e-14
DEFAULT_T_GRID = tuple(np.linspace(1.0 / 9.0, 1.0, 9))

Data = Union[SystemState, Tuple[ComplexField, RealField]]


# ---------------------------------------------------------------------------
# Picard iteration
# ---------------------------------------------------------------------------

def _unpack(data: Data) -> Tuple[ComplexField, RealField]:
    if isinstance(data, SystemState):
        return data.u, data.v
    u0, v0 = data
    if u0.grid != v0.grid:
        raise InvalidInputError("u0 and v0 must live on the same grid")
    return u0, v0


def picard_lattice(delta: float, nt: int) -> float:
    """Time step for which t_j = (j - nt/2) dt ends exactly at 2 delta (and starts one step below -2 delta)."""
    if not (np.isfinite(delta) and delta > 0):
        raise WindowError(f"delta must be positive, got {delta}")
    if nt < 8:
        raise ResolutionError(f"Picard lattice needs nt >= 8, got {nt}")
    return 4.0 * delta / (nt - 2)


@dataclass(frozen=True, eq=False)
class PicardIterate:
    u: SpaceTimeField
    v: SpaceTimeField
    delta: float
    k: int = 0

    def __post_init__(self):
        if (self.u.grid != self.v.grid or self.u.nt != self.v.nt or self.u.dt != self.v.dt):
            raise InvalidInputError("u and v iterates must share grid and time lattice")

    @property
    def times(self) -> np.ndarray:
        return self.u.times

    def sup_difference(self, other: 'PicardIterate', t_range: Optional[Tuple[float, float]] = None) -> float:
        cols = slice(None)
        if t_range is not None:
            t = self.times
            cols = (t >= t_range[0] - 1e-12) & (t <= t_range[1] + 1e-12)
        du = np.abs(self.u.values[:, cols] - other.u.values[:, cols])
        dv = np.abs(self.v.values[:, cols] - other.v.values[:, cols])
        return float(max(np.max(du), np.max(dv)))


def _free_evolution(f, times: np.ndarray, dispersion: Dispersion) -> np.ndarray:
    grid = f.grid
    phase = np.exp(-1j * dispersion.symbol(grid.xi)[:, None] * times[None, :])
    return grid.inverse(f.spectrum[:, None] * phase, axis=0)


def _cumulative_simpson(h: np.ndarray, dt: float) -> np.ndarray:
    return (cumulative_simpson(h.real, dx=dt, axis=1, initial=0)
            + 1j * cumulative_simpson(h.imag, dx=dt, axis=1, initial=0))


def _duhamel_integral(grid: Grid, g: np.ndarray, times: np.ndarray, dt: float,
                      dispersion: Dispersion) -> np.ndarray:
    """int_0^t U(t - t') g(t') dt' by composite Simpson, outward from t = 0 in both directions."""
    phi = dispersion.symbol(grid.xi)[:, None]
    h = np.exp(1j * phi * times[None, :]) * grid.forward(g, axis=0)
    j0 = int(np.argmin(np.abs(times)))
    acc = np.zeros_like(h)
    acc[:, j0:] = _cumulative_simpson(h[:, j0:], dt)
    acc[:, j0::-1] = -_cumulative_simpson(h[:, j0::-1], dt)
    return grid.inverse(np.exp(-1j * phi * times[None, :]) * acc, axis=0)


def free_iterate(data: Data, delta: float, nt: int = 128) -> PicardIterate:
    """Iterate 0: psi(t) times the free evolution of the data."""
    u0, v0 = _unpack(data)
    grid = u0.grid
    dt = picard_lattice(delta, nt)
    times = (np.arange(nt) - nt // 2) * dt
    outer = psi(times)[None, :]
    u = outer * _free_evolution(u0, times, Dispersion.SCHRODINGER)
    v = outer * _free_evolution(v0, times, Dispersion.AIRY).real
    return PicardIterate(SpaceTimeField(grid, nt, dt, u, window=delta),
                         SpaceTimeField(grid, nt, dt, v, window=delta), delta, 0)


def picard_map(it: PicardIterate, data: Data, p: SystemParams, delta: float) -> PicardIterate:
    """One application of (Phi_1, Phi_2) to the iterate."""
    u0, v0 = _unpack(data)
    grid = it.u.grid
    times, dt = it.times, it.u.dt
    reach = min(-times[0], times[-1])
    if 2.0 * delta > reach * (1 + 1e-12):
        raise WindowError(f"time window |t| <= {reach:.6g} does not contain [-2 delta, 2 delta], delta={delta}")
    if int(math.floor(delta / dt + 1e-9)) + 1 < MIN_POINTS_PER_DELTA:
        raise ResolutionError(
            f"only {int(delta / dt) + 1} lattice points on [0, delta]; need {MIN_POINTS_PER_DELTA}")

    cut = psi(times / delta)[None, :]
    outer = psi(times)[None, :]
    u = grid.dealiased(it.u.values)
    v = grid.dealiased(it.v.values.real).real
    density = np.abs(u) ** 2

    g_u = cut * grid.dealiased(p.alpha * u * v + p.beta * density * u)
    drive = grid.forward(p.gamma * density - 0.5 * v * v, axis=0)
    ik = (1j * grid.xi * grid.nyquist_mask * grid.dealias_mask)[:, None]
    g_v = cut * grid.inverse(ik * drive, axis=0)

    phi1 = outer * (_free_evolution(u0, times, Dispersion.SCHRODINGER)
                    - 1j * _duhamel_integral(grid, g_u, times, dt, Dispersion.SCHRODINGER))
    phi2 = outer * (_free_evolution(v0, times, Dispersion.AIRY)
                    + _duhamel_integral(grid, g_v, times, dt, Dispersion.AIRY)).real
    return PicardIterate(it.u.with_values(phi1, window=delta),
                         it.v.with_values(phi2, window=delta), delta, it.k + 1)


@dataclass
class PicardRun:
    iterates: List[PicardIterate]
    differences: List[float]
    # differences at or below this are round-off on a converged run
    floor: float = 0.0

    @property
    def final(self) -> PicardIterate:
        return self.iterates[-1]

    def ratios(self) -> List[float]:
        out = []
        for prev, cur in zip(self.differences, self.differences[1:]):
            out.append(0.0 if prev < 1e-300 else cur / prev)
        return out

    def contracts(self) -> bool:
        if not all(np.isfinite(self.differences)):
            return False
        pairs = list(zip(self.differences, self.differences[1:]))
        return bool(pairs) and all(cur <= self.floor or cur < prev for prev, cur in pairs)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'k': np.arange(1, len(self.differences) + 1),
            'sup_difference': self.differences,
        })


def picard_iterate(data: Data, p: SystemParams, delta: float, iterations: int = 8,
                   nt: int = 128) -> PicardRun:
    """Run the Picard maps from the free iterate; differences[k] = sup |it_{k+1} - it_k|."""
    if iterations < 1:
        raise InvalidInputError(f"iterations must be >= 1, got {iterations}")
    current = free_iterate(data, delta, nt)
    scale = max(float(np.max(np.abs(f.values))) for f in _unpack(data))
    run = PicardRun([current], [], floor=CONVERGED_FLOOR * scale)
    with np.errstate(over='ignore', invalid='ignore'):
        for _ in range(iterations):
            nxt = picard_map(current, data, p, delta)
            run.differences.append(nxt.sup_difference(current))
            run.iterates.append(nxt)
            current = nxt
            if not np.isfinite(run.differences[-1]):
                break
    logger.debug("picard delta=%g: differences %s", delta, run.differences)
    return run


def solver_agreement(run: PicardRun, data: Data, p: SystemParams, substeps: int = 8) -> float:
    """sup |Picard iterate - time-stepped solution| over the lattice times in [0, delta].

    The solver runs at dt/substeps and is sampled on the Picard lattice.
    """
    u0, v0 = _unpack(data)
    final = run.final
    times, dt = final.times, final.u.dt
    j0 = int(np.argmin(np.abs(times)))
    steps = int(math.floor(final.delta / dt + 1e-9))
    trajectory = evolve(SystemState(u0, v0, 0.0), steps * dt,
                        SolverConfig(dt=dt / substeps, record_every=substeps), p)
    worst = 0.0
    for j, state in enumerate(trajectory.states[:steps + 1]):
        du = np.max(np.abs(final.u.values[:, j0 + j] - state.u.values))
        dv = np.max(np.abs(final.v.values[:, j0 + j].real - state.v.values))
        worst = max(worst, float(du), float(dv))
    return worst


@dataclass
class ContractionProbe:
    rows: List[Dict]
    critical: Dict[float, Optional[float]]
    fit: Optional[FitResult]

    @property
    def inconclusive(self) -> bool:
        return all(v is None for v in self.critical.values())

    def is_monotone(self) -> bool:
        """delta* never increases with amplitude (missing delta* counts as zero)."""
        values = [self.critical[a] or 0.0 for a in sorted(self.critical)]
        return all(b <= a for a, b in zip(values, values[1:]))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows)


def _scaled(data: Data, amplitude: float) -> Tuple[ComplexField, RealField]:
    u0, v0 = _unpack(data)
    return (ComplexField(u0.grid, amplitude * u0.values), RealField(v0.grid, amplitude * v0.values))


def picard_contraction_probe(data: Data, p: SystemParams, delta_list: Sequence[float],
                             amplitudes: Sequence[float] = (1.0,), iterations: int = 6,
                             nt: int = 128) -> ContractionProbe:
    """Largest contracting delta for each amplitude scale of the data, and the fitted power of delta*."""
    rows, critical = [], {}
    for amplitude in sorted(float(a) for a in amplitudes):
        scaled = _scaled(data, amplitude)
        best = None
        for delta in sorted(float(d) for d in delta_list):
            run = picard_iterate(scaled, p, delta, iterations, nt)
            contracts = run.contracts()
            ratios = run.ratios()
            rows.append({
                'amplitude': amplitude,
                'delta': delta,
                'contracts': contracts,
                'max_ratio': max(ratios) if ratios else float('nan'),
                'final_difference': run.differences[-1],
            })
            if contracts:
                best = delta
        critical[amplitude] = best
        logger.info("amplitude %g: largest contracting delta %s", amplitude, best)

    points = [(a, d) for a, d in critical.items() if d is not None]
    fit = None
    if len(points) >= 3:
        try:
            fit = fit_loglog(points)
        except FitError as exc:
            logger.warning("delta* fit skipped: %s", exc)
    probe = ContractionProbe(rows, critical, fit)
    if probe.inconclusive:
        logger.warning("no delta in %s contracts for any amplitude; probe inconclusive", list(delta_list))
    return probe


# ---------------------------------------------------------------------------
# Second iterate
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def gauss_legendre(count: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(count)
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return nodes, weights


@dataclass(frozen=True)
class FrequencyInterval:
    center: float
    half_width: float

    def __post_init__(self):
        if not (np.isfinite(self.half_width) and self.half_width > 0):
            raise InvalidInputError(f"interval half_width must be positive, got {self.half_width}")

    @property
    def lo(self) -> float:
        return self.center - self.half_width

    @property
    def hi(self) -> float:
        return self.center + self.half_width

    def mirrored(self) -> 'FrequencyInterval':
        return FrequencyInterval(-self.center, self.half_width)

    def contains(self, xi) -> np.ndarray:
        return np.abs(np.asarray(xi, dtype=float) - self.center) <= self.half_width


def snap_frequency(N_target: float) -> Tuple[float, int]:
    """Nearest N with (N - 1/2)^3 = 2 pi k, k a positive integer."""
    if not (np.isfinite(N_target) and N_target > 0.5):
        raise InvalidInputError(f"target frequency must exceed 1/2, got {N_target}")
    k = max(1, int(round((N_target - 0.5) ** 3 / (2.0 * np.pi))))
    return 0.5 + float(np.cbrt(2.0 * np.pi * k)), k


@dataclass(frozen=True)
class InflationConfig:
    N: float
    k: int
    eps0: float = 1e-2
    n: float = 6.0
    s: float = 0.0
    l: float = 1.0
    quad_points: int = 64
    conv_points: int = 128
    symmetric_v: bool = False

    def __post_init__(self):
        if not (self.eps0 > 0 and np.isfinite(self.eps0)):
            raise InvalidInputError(f"eps0 must be positive, got {self.eps0}")
        if not self.n > 0:
            raise InvalidInputError(f"Lambda exponent n must be positive, got {self.n}")
        if self.quad_points < 2 or self.conv_points < 2:
            raise InvalidInputError("quadrature needs at least 2 points per interval")
        ratio = (self.N - 0.5) ** 3 / (2.0 * np.pi)
        if self.k < 1 or abs(ratio - self.k) > 1e-9 * self.k:
            raise InvalidInputError(f"N={self.N} is not snapped: (N-1/2)^3/(2 pi) = {ratio}, k={self.k}")

    @classmethod
    def build(cls, N_target: float, **kwargs) -> 'InflationConfig':
        N, k = snap_frequency(N_target)
        return cls(N=N, k=k, **kwargs)

    @cached_property
    def upsilon(self) -> FrequencyInterval:
        return FrequencyInterval(self.N - 0.5, 1.0 / (100.0 * self.N ** 2))

    @cached_property
    def upsilon2(self) -> FrequencyInterval:
        # (c^2 + c)/2 with c = N - 1/2 is (N^2 - 1/4)/2, kept in this form so the
        # resonant constant c^2 + c - 2 c_2 vanishes exactly in floating point
        c = self.upsilon.center
        return FrequencyInterval((c * c + c) / 2.0, 1.0 / (200.0 * self.N))

    @cached_property
    def upsilon1(self) -> FrequencyInterval:
        # N - N^2/2 - 3/8
        return FrequencyInterval(self.upsilon.center - self.upsilon2.center, 1.0 / self.N)

    @cached_property
    def lam(self) -> FrequencyInterval:
        return FrequencyInterval(1.0, self.N ** (-self.n))

    @property
    def boxes(self) -> Dict[str, FrequencyInterval]:
        return {'upsilon': self.upsilon, 'upsilon1': self.upsilon1,
                'upsilon2': self.upsilon2, 'lambda': self.lam}

    @property
    def u_amplitude(self) -> float:
        return self.eps0 * self.N ** (-2.0 * self.s + 0.5)

    @property
    def v_amplitude(self) -> float:
        return self.eps0 * self.N ** (self.n / 2.0)

    def u_support(self) -> List[Tuple[FrequencyInterval, float]]:
        a = self.u_amplitude
        return [(self.upsilon1, a), (self.upsilon2, a)]

    def v_support(self) -> List[Tuple[FrequencyInterval, float]]:
        b = self.v_amplitude
        support = [(self.lam, b)]
        if self.symmetric_v:
            support.append((self.lam.mirrored(), b))
        return support

    def support_inclusion(self) -> bool:
        """Upsilon - Upsilon_2 lies inside Upsilon_1."""
        u, u1, u2 = self.upsilon, self.upsilon1, self.upsilon2
        drift = abs(u.center - u2.center - u1.center)
        return drift + u.half_width + u2.half_width <= u1.half_width


def time_kernel(Q, t):
    """K(Q, t) = (1 - exp(-i t Q)) / (i Q), with its Taylor series for |Q| < 1e-6."""
    Q = np.asarray(Q, dtype=float)
    t = np.asarray(t, dtype=float)
    small = np.abs(Q) < SERIES_THRESHOLD
    Qs = np.where(small, 1.0, Q)
    exact = -np.expm1(-1j * t * Qs) / (1j * Qs)
    series = t - 1j * Q * t ** 2 / 2 - Q ** 2 * t ** 3 / 6 + 1j * Q ** 3 * t ** 4 / 24
    return np.where(small, series, exact)


def resonance_nls(xi, xi2):
    """Q1(xi, xi2) = xi (xi^2 + xi - 2 xi2)."""
    xi = np.asarray(xi, dtype=float)
    return xi * (xi * xi + xi - 2.0 * np.asarray(xi2, dtype=float))


def resonance_kdv(xi, xi2):
    """Q2(xi, xi2) = 3 xi (xi - xi2) xi2."""
    xi = np.asarray(xi, dtype=float)
    xi2 = np.asarray(xi2, dtype=float)
    return 3.0 * xi * (xi - xi2) * xi2


def _convolution(ref: float, y: np.ndarray, t: float, support, kind: str, points: int) -> np.ndarray:
    """sum over box pairs (A, B) of amp_A amp_B int_{xi2 in B, xi - xi2 in A} K(Q, t) dxi2.

    xi = ref + y; every box is handled through offsets from its centre.
    """
    x, w = gauss_legendre(points)
    xi = ref + y
    total = np.zeros(y.shape, dtype=np.complex128)
    for A, amp_a in support:
        for B, amp_b in support:
            offset = (ref - (A.center + B.center)) + y
            lo = np.maximum(offset - A.half_width, -B.half_width)
            hi = np.minimum(offset + A.half_width, B.half_width)
            live = hi > lo
            if not np.any(live):
                continue
            mid = 0.5 * (lo + hi)
            half = np.where(live, 0.5 * (hi - lo), 0.0)
            z = mid[:, None] + half[:, None] * x[None, :]
            if kind == 'nls':
                bracket = ((ref * ref + ref - 2.0 * B.center)
                           + (2.0 * ref + 1.0) * y[:, None] + y[:, None] ** 2 - 2.0 * z)
                Q = xi[:, None] * bracket
            else:
                Q = 3.0 * xi[:, None] * (A.center + (offset[:, None] - z)) * (B.center + z)
            total += amp_a * amp_b * half * (time_kernel(Q, t) @ w)
    return total


def _output_centres(cfg: InflationConfig) -> List[float]:
    centres = [cfg.upsilon.center]
    for support in (cfg.u_support(), cfg.v_support()):
        centres.extend(A.center + B.center for A, _ in support for B, _ in support)
    return centres


def second_iterate_offset(ref: float, y, t: float, cfg: InflationConfig, p: SystemParams,
                          terms: Sequence[str] = ('nls', 'kdv')) -> np.ndarray:
    """F[A_2](ref + y, t) with the output frequency given as an offset from `ref`."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    bracket = np.zeros(y.shape, dtype=np.complex128)
    if 'nls' in terms and p.gamma != 0:
        bracket += p.gamma * _convolution(ref, y, t, cfg.u_support(), 'nls', cfg.conv_points)
    if 'kdv' in terms:
        bracket -= 0.5 * _convolution(ref, y, t, cfg.v_support(), 'kdv', cfg.conv_points)
    cube = ref ** 3 + 3.0 * ref * ref * y + 3.0 * ref * y * y + y ** 3
    return 1j * (ref + y) * np.exp(1j * t * cube) * bracket


def second_iterate_hat(xi, t: float, cfg: InflationConfig, p: SystemParams,
                       terms: Sequence[str] = ('nls', 'kdv')):
    """F[A_2](xi, t) for absolute frequencies xi (scalar or array)."""
    scalar = np.ndim(xi) == 0
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    centres = np.array(_output_centres(cfg))
    out = np.zeros(xi.shape, dtype=np.complex128)
    nearest = np.argmin(np.abs(xi[:, None] - centres[None, :]), axis=1)
    for idx in np.unique(nearest):
        sel = nearest == idx
        ref = float(centres[idx])
        out[sel] = second_iterate_offset(ref, xi[sel] - ref, t, cfg, p, terms)
    return out[0] if scalar else out


def _window_norm(ref: float, pieces: Iterable[Tuple[float, float]], t: float,
                 cfg: InflationConfig, p: SystemParams, terms: Sequence[str], l: float) -> float:
    x, w = gauss_legendre(cfg.quad_points)
    total = 0.0
    for lo, hi in pieces:
        half = 0.5 * (hi - lo)
        y = 0.5 * (hi + lo) + half * x
        F = second_iterate_offset(ref, y, t, cfg, p, terms)
        total += half * float(np.sum(w * japanese(ref + y) ** (2.0 * l) * np.abs(F) ** 2))
    return math.sqrt(total)


def nls_term_norm(cfg: InflationConfig, p: SystemParams, t: float = 1.0) -> float:
    """||<xi>^l F[A_2](., t)||_{L^2(Upsilon)}."""
    h = cfg.upsilon.half_width
    return _window_norm(cfg.upsilon.center, [(-h, h)], t, cfg, p, ('nls',), cfg.l)


def kdv_term_norm(cfg: InflationConfig, p: SystemParams, t: float = 1.0) -> float:
    """Norm of the KdV self-interaction over |xi - 2| <= 2 N^{-n}; the tent kink sits at the centre."""
    h = 2.0 * cfg.lam.half_width
    return _window_norm(2.0 * cfg.lam.center, [(-h, 0.0), (0.0, h)], t, cfg, p, ('kdv',), cfg.l)


def phase_coherence(cfg: InflationConfig, t_points: int = 33) -> Tuple[float, float]:
    """min Re(e^{i xi^3} e^{-i t' Q1}) and max |Q1| over xi in Upsilon, xi2 in Upsilon_2, t' in [0, 1]."""
    x_u, _ = gauss_legendre(cfg.quad_points)
    x_2, _ = gauss_legendre(cfg.conv_points)
    c = cfg.upsilon.center
    y = cfg.upsilon.half_width * x_u
    z = cfg.upsilon2.half_width * x_2
    xi = c + y
    Q = xi[:, None] * ((2.0 * c + 1.0) * y[:, None] + y[:, None] ** 2 - 2.0 * z[None, :])
    # e^{i c^3} = 1 for snapped N
    cube_offset = 3.0 * c * c * y + 3.0 * c * y * y + y ** 3
    tp = np.linspace(0.0, 1.0, t_points)
    phase = np.exp(1j * (cube_offset[:, None, None] - tp[None, None, :] * Q[:, :, None]))
    return float(np.min(phase.real)), float(np.max(np.abs(Q)))


@dataclass
class InflationReport:
    rows: List[Dict]
    fit: FitResult
    kdv_fit: FitResult
    phase_min: float
    resonance_max: float
    s: float
    l: float

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=[
            'N', 'k', 'G_total', 'G_at_1', 'G_nls_term', 'G_kdv_term', 'phase_min', 'slope_so_far'])

    def summary(self) -> Dict:
        return {
            'slope': self.fit.slope,
            'stderr': self.fit.stderr,
            'target_slope': self.l - 4.0 * self.s,
            'kdv_slope': self.kdv_fit.slope,
            'phase_min': self.phase_min,
            'resonance_max': self.resonance_max,
            'N': [row['N'] for row in self.rows],
            'k': [row['k'] for row in self.rows],
        }


def _inflation_point(N_target: float, eps0: float, n: float, s: float, l: float,
                     quad_points: int, conv_points: int, p: SystemParams,
                     t_grid: Sequence[float]) -> Tuple[Dict, float]:
    cfg = InflationConfig.build(N_target, eps0=eps0, n=n, s=s, l=l,
                                quad_points=quad_points, conv_points=conv_points)
    if not cfg.support_inclusion():
        raise InvalidInputError(f"Upsilon - Upsilon_2 escapes Upsilon_1 at N={cfg.N}")
    by_t = {t: nls_term_norm(cfg, p, t) for t in t_grid}
    g_kdv = kdv_term_norm(cfg, p, 1.0)
    coherence, q_max = phase_coherence(cfg)
    logger.info("N=%.6g (k=%d): G=%.6e, KdV term=%.6e", cfg.N, cfg.k, max(by_t.values()), g_kdv)
    row = {
        'N': cfg.N,
        'k': cfg.k,
        'G_total': max(by_t.values()),
        'G_at_1': by_t[1.0],
        'G_nls_term': by_t[1.0],
        'G_kdv_term': g_kdv,
        'phase_min': coherence,
        'slope_so_far': float('nan'),
    }
    return row, q_max


def inflation_experiment(s: float, l: float, N_list: Sequence[float], eps0: float = 1e-2,
                         n: float = 6.0, quad_points: int = 64, conv_points: int = 128,
                         p: Optional[SystemParams] = None,
                         t_grid: Sequence[float] = DEFAULT_T_GRID,
                         mapper: Optional[Callable] = None) -> InflationReport:
    """G(N) = sup_t ||<xi>^l F[A_2](., t)||_{L^2(Upsilon)} over snapped N, with log-log slopes.

    `mapper` (e.g. a pool's map) evaluates the N sweep; rows keep the order of N_list.
    """
    if len(N_list) < 3:
        raise FitError(f"inflation fit needs at least 3 values of N, got {len(N_list)}")
    if l <= 4 * s:
        logger.warning("l=%g <= 4s=%g: outside the growth branch", l, 4 * s)
    p = p or SystemParams(alpha=1.0, beta=0.0, gamma=1.0, s=s, l=l)
    t_grid = sorted(set(float(t) for t in t_grid) | {1.0})

    point = partial(_inflation_point, eps0=eps0, n=n, s=s, l=l, quad_points=quad_points,
                    conv_points=conv_points, p=p, t_grid=t_grid)
    points = list((mapper or map)(point, N_list))

    rows: List[Dict] = []
    phase_min, resonance_max = 1.0, 0.0
    for row, q_max in points:
        phase_min = min(phase_min, row['phase_min'])
        resonance_max = max(resonance_max, q_max)
        rows.append(row)
        if len(rows) >= 3:
            rows[-1]['slope_so_far'] = fit_loglog([(r['N'], r['G_total']) for r in rows]).slope

    fit = fit_loglog([(r['N'], r['G_total']) for r in rows])
    kdv_fit = fit_loglog([(r['N'], r['G_kdv_term']) for r in rows])
    return InflationReport(rows, fit, kdv_fit, phase_min, resonance_max, s, l)
