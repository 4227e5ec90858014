"""
Linear groups and the nonlinear time stepper for the Schrodinger-KdV system

    i u_t + u_xx = alpha u v + beta |u|^2 u
    v_t + v_xxx + (v^2)_x / 2 = gamma (|u|^2)_x

on the periodic box of a spectral.Grid. Time stepping is integrating-factor
RK4: the stiff linear flows exp(-i xi^2 t) and exp(i xi^3 t) are removed
exactly and classical RK4 runs on the remaining nonlinearity.

Status: Active (library)
"""

import io
import json
import logging
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np
import pandas as pd

from errors import BlowUpError, InvalidInputError, StabilityWarning
from spectral import ComplexField, Dispersion, Grid, RealField

logger = logging.getLogger(__name__)

BLOW_UP_THRESHOLD = 1e12
STABILITY_LIMIT = 50.0
SNAPSHOT_MAGIC = b'SKDV1'

Observer = Callable[['SystemState'], float]


@dataclass(frozen=True)
class SystemParams:
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    s: float = 0.0
    l: float = 0.0

    def __post_init__(self):
        for name in ('alpha', 'beta', 'gamma', 's', 'l'):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise InvalidInputError(f"params.{name} must be finite, got {value}")
            object.__setattr__(self, name, value)

    def require_positive_coupling(self) -> None:
        """The I-method energy is coercive only for alpha * gamma > 0."""
        if self.alpha * self.gamma <= 0:
            raise InvalidInputError(
                f"alpha*gamma must be positive, got alpha={self.alpha}, gamma={self.gamma}")

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class SystemState:
    u: ComplexField
    v: RealField
    t: float = 0.0

    def __post_init__(self):
        if self.u.grid != self.v.grid:
            raise InvalidInputError("u and v must live on the same grid")
        if not isinstance(self.v, RealField):
            raise InvalidInputError("v must be a RealField")
        object.__setattr__(self, 't', float(self.t))

    @property
    def grid(self) -> Grid:
        return self.u.grid

    def max_abs(self) -> float:
        return max(self.u.max_abs(), self.v.max_abs())


@dataclass(frozen=True)
class SolverConfig:
    dt: float = 1e-3
    dealias: bool = True
    record_every: int = 1

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise InvalidInputError(f"solver dt must be positive, got {self.dt}")
        if int(self.record_every) < 1:
            raise InvalidInputError(f"record_every must be >= 1, got {self.record_every}")
        object.__setattr__(self, 'record_every', int(self.record_every))


@dataclass
class Trajectory:
    times: List[float] = field(default_factory=list)
    states: List[SystemState] = field(default_factory=list)
    observers: Dict[str, List[float]] = field(default_factory=dict)
    max_imag_residue: float = 0.0

    def record(self, state: SystemState, observers: Mapping[str, Observer]) -> None:
        self.times.append(state.t)
        self.states.append(state)
        for name, fn in observers.items():
            self.observers.setdefault(name, []).append(float(fn(state)))

    @property
    def final(self) -> SystemState:
        return self.states[-1]

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame({'t': self.times})
        for name, values in self.observers.items():
            df[name] = values
        return df


def linear_propagate(f: Union[ComplexField, RealField], t: float,
                     dispersion: Dispersion) -> Union[ComplexField, RealField]:
    """U_phi(t) f: multiply the spectrum by exp(-i t phi(xi))."""
    dispersion = Dispersion(dispersion)
    factor = np.exp(-1j * t * dispersion.symbol(f.grid.xi))
    if isinstance(f, RealField) and dispersion is not Dispersion.AIRY:
        return ComplexField.from_spectrum(f.grid, factor * f.spectrum)
    return f.with_spectrum(factor * f.spectrum)


class _Stepper:
    """Integrating-factor RK4 on the spectra (u_hat, v_hat) for one step size."""

    def __init__(self, grid: Grid, dt: float, p: SystemParams, dealias: bool = True):
        self.grid = grid
        self.dt = dt
        self.p = p
        xi = grid.xi
        self.ik = 1j * xi * grid.nyquist_mask
        self.mask = grid.dealias_mask if dealias else np.ones(grid.nx)
        self.eu_half = np.exp(-1j * xi ** 2 * dt / 2)
        self.ev_half = np.exp(1j * xi ** 3 * dt / 2)
        self.eu = self.eu_half ** 2
        self.ev = self.ev_half ** 2

    def nonlinear(self, uh: np.ndarray, vh: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        g, p = self.grid, self.p
        u = g.inverse(uh * self.mask)
        v = g.inverse(vh * self.mask).real
        density = np.abs(u) ** 2
        nu = -1j * g.forward(p.alpha * u * v + p.beta * density * u)
        nv = self.ik * g.forward(p.gamma * density - 0.5 * v * v)
        return self.dt * nu * self.mask, self.dt * nv * self.mask

    def advance(self, uh: np.ndarray, vh: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        Eu, Ev, Eu2, Ev2 = self.eu_half, self.ev_half, self.eu, self.ev
        au, av = self.nonlinear(uh, vh)
        bu, bv = self.nonlinear(Eu * (uh + au / 2), Ev * (vh + av / 2))
        cu, cv = self.nonlinear(Eu * uh + bu / 2, Ev * vh + bv / 2)
        du, dv = self.nonlinear(Eu2 * uh + Eu * cu, Ev2 * vh + Ev * cv)
        uh_new = Eu2 * uh + (Eu2 * au + 2 * Eu * (bu + cu) + du) / 6
        vh_new = Ev2 * vh + (Ev2 * av + 2 * Ev * (bv + cv) + dv) / 6
        return uh_new, vh_new * self.grid.nyquist_mask


def _check_finite(u: np.ndarray, v: np.ndarray, t: float) -> None:
    peak = max(np.max(np.abs(u)), np.max(np.abs(v)))
    if not (np.isfinite(peak) and peak <= BLOW_UP_THRESHOLD):
        raise BlowUpError(
            f"state left the finite range at t={t:.6g} (max |value| = {peak:.3g})",
            t=t, diagnostics={'max_abs': float(peak) if np.isfinite(peak) else None,
                              'finite': bool(np.isfinite(peak))})


def _stability_guard(grid: Grid, dt: float) -> None:
    stiffness = dt * float(np.max(np.abs(grid.xi))) ** 3
    if stiffness > STABILITY_LIMIT:
        message = (f"dt*max|xi|^3 = {stiffness:.3g} exceeds {STABILITY_LIMIT:g}; "
                   "the nonlinear sub-flow may be under-resolved")
        logger.warning(message)
        warnings.warn(message, StabilityWarning, stacklevel=3)


def _advance_state(stepper: _Stepper, uh: np.ndarray, vh: np.ndarray,
                   t_new: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, float]:
    uh, vh = stepper.advance(uh, vh)
    u = stepper.grid.inverse(uh)
    v_complex = stepper.grid.inverse(vh)
    _check_finite(u, v_complex, t_new)
    residue = float(np.max(np.abs(v_complex.imag)))
    v = v_complex.real
    # project v_hat back onto Hermitian spectra
    vh = stepper.grid.forward(v) * stepper.grid.nyquist_mask
    return uh, vh, u, v, residue


def step(state: SystemState, cfg: SolverConfig, p: SystemParams) -> SystemState:
    """One integrating-factor RK4 step of size cfg.dt."""
    _stability_guard(state.grid, cfg.dt)
    stepper = _Stepper(state.grid, cfg.dt, p, cfg.dealias)
    vh = state.v.spectrum * state.grid.nyquist_mask
    _, _, u, v, _ = _advance_state(stepper, state.u.spectrum, vh, state.t + cfg.dt)
    return SystemState(ComplexField(state.grid, u), RealField(state.grid, v), state.t + cfg.dt)


def evolve(state: SystemState, T: float, cfg: SolverConfig, p: SystemParams,
           observers: Optional[Mapping[str, Observer]] = None) -> Trajectory:
    """Step from state.t to state.t + T, recording every cfg.record_every steps and at the end.

    A trailing partial step is taken when T is not a multiple of dt. On blow-up
    the BlowUpError carries the trajectory recorded so far.
    """
    if not (math.isfinite(T) and T >= 0):
        raise InvalidInputError(f"horizon T must be non-negative, got {T}")
    observers = dict(observers or {})
    grid = state.grid
    trajectory = Trajectory()
    trajectory.record(state, observers)
    if T == 0:
        return trajectory

    _stability_guard(grid, cfg.dt)
    n_full = int(math.floor(T / cfg.dt + 1e-9))
    remainder = T - n_full * cfg.dt
    if remainder <= 1e-12 * max(T, 1.0):
        remainder = 0.0
    n_total = n_full + (1 if remainder > 0 else 0)
    logger.info("evolving %d steps of dt=%g to T=%g on nx=%d", n_total, cfg.dt, T, grid.nx)

    stepper = _Stepper(grid, cfg.dt, p, cfg.dealias)
    uh = np.array(state.u.spectrum)
    vh = np.array(state.v.spectrum) * grid.nyquist_mask
    t0 = state.t
    for n in range(1, n_total + 1):
        if n > n_full:
            stepper = _Stepper(grid, remainder, p, cfg.dealias)
            t_new = t0 + T
        else:
            t_new = t0 + n * cfg.dt
        try:
            uh, vh, u, v, residue = _advance_state(stepper, uh, vh, t_new)
        except BlowUpError as exc:
            exc.trajectory = trajectory
            logger.warning("blow-up at t=%g after %d recorded samples", exc.t, len(trajectory.times))
            raise
        trajectory.max_imag_residue = max(trajectory.max_imag_residue, residue)
        if n % cfg.record_every == 0 or n == n_total:
            current = SystemState(ComplexField(grid, u), RealField(grid, v), t_new)
            trajectory.record(current, observers)
    return trajectory


def gaussian_data(grid: Grid, amplitude_u: float = 1.0, amplitude_v: float = 1.0,
                  width: float = 1.0, wavenumber: float = 0.0, center: float = 0.0) -> SystemState:
    """Gaussian bumps exp(-(x-center)^2/(2 width^2)); u optionally carries exp(i wavenumber x)."""
    x = grid.x - center
    envelope = np.exp(-x ** 2 / (2.0 * width ** 2))
    u = amplitude_u * envelope * np.exp(1j * wavenumber * grid.x)
    v = amplitude_v * envelope
    return SystemState(ComplexField(grid, u), RealField(grid, v), 0.0)


def _complex(re: np.ndarray, im: np.ndarray) -> np.ndarray:
    out = np.empty(len(re), dtype=np.complex128)
    out.real = re
    out.imag = im
    return out


def _snapshot_header(state: SystemState, p: SystemParams) -> Dict:
    return {'nx': state.grid.nx, 'L': state.grid.L, 't': state.t, 'params': p.to_dict()}


def _from_header(header: Dict, u: np.ndarray, v: np.ndarray) -> Tuple[SystemState, SystemParams]:
    grid = Grid(header['nx'], header['L'])
    state = SystemState(ComplexField(grid, u), RealField(grid, v), header['t'])
    return state, SystemParams(**header['params'])


def save_state(state: SystemState, p: SystemParams, path: Union[str, Path],
               fmt: str = 'binary') -> Path:
    """Write a snapshot: header (nx, L, t, params) then interleaved re/im samples of u and v."""
    path = Path(path)
    header = json.dumps(_snapshot_header(state, p), sort_keys=True)
    if fmt == 'binary':
        samples = np.concatenate([
            np.column_stack([state.u.values.real, state.u.values.imag]).ravel(),
            np.column_stack([state.v.values, np.zeros(state.grid.nx)]).ravel(),
        ]).astype('<f8')
        with open(path, 'wb') as f:
            f.write(SNAPSHOT_MAGIC + b'\n')
            f.write(header.encode('utf-8') + b'\n')
            f.write(samples.tobytes())
    elif fmt == 'csv':
        df = pd.DataFrame({
            'x': state.grid.x,
            'u_re': state.u.values.real,
            'u_im': state.u.values.imag,
            'v_re': state.v.values,
            'v_im': np.zeros(state.grid.nx),
        })
        with open(path, 'w', newline='') as f:
            f.write('# ' + header + '\n')
            df.to_csv(f, index=False, float_format='%.17g', lineterminator='\n')
    else:
        raise InvalidInputError(f"unknown snapshot format {fmt!r}")
    return path


def load_state(path: Union[str, Path]) -> Tuple[SystemState, SystemParams]:
    path = Path(path)
    with open(path, 'rb') as f:
        first = f.readline().rstrip(b'\n')
        if first == SNAPSHOT_MAGIC:
            header = json.loads(f.readline().decode('utf-8'))
            raw = np.frombuffer(f.read(), dtype='<f8')
            nx = header['nx']
            if raw.size != 4 * nx:
                raise InvalidInputError(f"snapshot {path} holds {raw.size} samples, expected {4 * nx}")
            u = raw[:2 * nx].reshape(nx, 2)
            v = raw[2 * nx:].reshape(nx, 2)
            return _from_header(header, _complex(u[:, 0], u[:, 1]), v[:, 0].copy())
        if not first.startswith(b'# '):
            raise InvalidInputError(f"{path} is not a snapshot file")
        header = json.loads(first[2:].decode('utf-8'))
        df = pd.read_csv(io.BytesIO(f.read()), float_precision='round_trip')
    u = _complex(df['u_re'].to_numpy(), df['u_im'].to_numpy())
    return _from_header(header, u, df['v_re'].to_numpy())
