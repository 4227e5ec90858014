"""
Spectral toolkit for the Schrodinger-KdV laboratory.

Periodic grids on [-L, L), spatial and space-time fields, Sobolev / L^p /
X_{s,b}(phi) norms, the I_{N,s} smoothing multiplier and the time cutoff psi.

Status: Active (library)

Fourier convention in space (Riemann sum of the integral transform):
    u_hat(xi_k) = dx * sum_j u_j exp(-i xi_k x_j)
    u_j         = 1/(2L) * sum_k u_hat(xi_k) exp(i xi_k x_j)
so that sum |u|^2 dx = 1/(2L) * sum |u_hat|^2. In time the same convention is
used with kernel exp(-i tau t); a free U_phi wave sits on tau = -phi(xi).
"""

import logging
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Callable, Optional, Tuple, Union

import numpy as np
from scipy import fft as sfft

from errors import InvalidInputError, ResolutionError, UndefinedRatioError, WindowError

logger = logging.getLogger(__name__)

# time axis is zero-padded by this factor before the temporal transform
TIME_PAD_FACTOR = 4


def japanese(x):
    """<x> = (1 + |x|^2)^(1/2)"""
    x = np.asarray(x, dtype=float)
    return np.sqrt(1.0 + x * x)


def _along(vec: np.ndarray, ndim: int, axis: int) -> np.ndarray:
    shape = [1] * ndim
    shape[axis] = -1
    return vec.reshape(shape)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Periodic box [-L, L) with nx points and its frequency lattice xi_k = pi k / L."""

    nx: int
    L: float

    def __post_init__(self):
        nx = int(self.nx)
        if nx < 8 or not _is_power_of_two(nx):
            raise InvalidInputError(f"grid.nx must be a power of two >= 8, got {self.nx}")
        if not (np.isfinite(self.L) and self.L > 0):
            raise InvalidInputError(f"grid.L must be positive and finite, got {self.L}")
        object.__setattr__(self, 'nx', nx)
        object.__setattr__(self, 'L', float(self.L))

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.nx

    @property
    def parseval_weight(self) -> float:
        return 1.0 / (2.0 * self.L)

    @cached_property
    def x(self) -> np.ndarray:
        return _frozen(-self.L + self.dx * np.arange(self.nx))

    @cached_property
    def k(self) -> np.ndarray:
        """Integer wavenumbers in FFT order (-nx/2 appears once, as the Nyquist mode)."""
        return _frozen(sfft.fftfreq(self.nx, d=1.0 / self.nx))

    @cached_property
    def xi(self) -> np.ndarray:
        return _frozen(np.pi * self.k / self.L)

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        mask = np.ones(self.nx)
        mask[self.nx // 2] = 0.0
        return _frozen(mask)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        # 2/3 rule
        return _frozen((np.abs(self.k) <= self.nx / 3.0).astype(float))

    @cached_property
    def _phase(self) -> np.ndarray:
        # exp(-i xi_k x_0) with x_0 = -L
        return _frozen(np.where(self.k % 2 == 0, 1.0, -1.0))

    def forward(self, values: np.ndarray, axis: int = 0) -> np.ndarray:
        values = np.asarray(values)
        phase = _along(self._phase, values.ndim, axis)
        return self.dx * phase * sfft.fft(values, axis=axis)

    def inverse(self, spectrum: np.ndarray, axis: int = 0) -> np.ndarray:
        spectrum = np.asarray(spectrum)
        phase = _along(self._phase, spectrum.ndim, axis)
        return sfft.ifft(spectrum * phase, axis=axis) / self.dx

    def dealiased(self, values: np.ndarray, axis: int = 0) -> np.ndarray:
        """Physical samples with the top third of spatial modes removed."""
        mask = _along(self.dealias_mask, np.ndim(values), axis)
        return sfft.ifft(sfft.fft(values, axis=axis) * mask, axis=axis)


class _SpatialField:
    """Shared behaviour of ComplexField and RealField."""

    _dtype = np.complex128

    def __post_init__(self):
        vals = np.array(self.values, dtype=self._dtype, copy=True)
        if vals.shape != (self.grid.nx,):
            raise InvalidInputError(
                f"field has shape {vals.shape}, grid expects ({self.grid.nx},)")
        object.__setattr__(self, 'values', _frozen(vals))

    @cached_property
    def spectrum(self) -> np.ndarray:
        return _frozen(self.grid.forward(self.values))

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable[[np.ndarray], np.ndarray]):
        return cls(grid, fn(grid.x))

    @classmethod
    def zeros(cls, grid: Grid):
        return cls(grid, np.zeros(grid.nx))

    def with_values(self, values):
        return type(self)(self.grid, values)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass(frozen=True, eq=False)
class ComplexField(_SpatialField):
    """Complex samples on a grid (the Schrodinger component u)."""

    grid: Grid
    values: np.ndarray

    @classmethod
    def from_spectrum(cls, grid: Grid, spectrum: np.ndarray) -> 'ComplexField':
        spectrum = np.array(spectrum, dtype=np.complex128, copy=True)
        field = cls(grid, grid.inverse(spectrum))
        field.__dict__['spectrum'] = _frozen(spectrum)
        return field

    def with_spectrum(self, spectrum: np.ndarray) -> 'ComplexField':
        return ComplexField.from_spectrum(self.grid, spectrum)


@dataclass(frozen=True, eq=False)
class RealField(_SpatialField):
    """Real samples on a grid (the KdV component v); spectrum is Hermitian."""

    grid: Grid
    values: np.ndarray

    _dtype = np.float64

    def __post_init__(self):
        vals = np.asarray(self.values)
        if np.iscomplexobj(vals):
            vals = vals.real
        object.__setattr__(self, 'values', vals)
        super().__post_init__()

    @classmethod
    def from_spectrum(cls, grid: Grid, spectrum: np.ndarray) -> 'RealField':
        # Nyquist has no Hermitian partner on the lattice
        spectrum = np.asarray(spectrum) * grid.nyquist_mask
        return cls(grid, grid.inverse(spectrum).real)

    def with_spectrum(self, spectrum: np.ndarray) -> 'RealField':
        return RealField.from_spectrum(self.grid, spectrum)


Field = Union[ComplexField, RealField]


def hermitian_defect(field: Field) -> float:
    """max |u_hat(-xi) - conj(u_hat(xi))| over the lattice (Nyquist excluded)."""
    spec = field.spectrum
    nx = field.grid.nx
    idx = np.arange(nx)
    mirrored = spec[(-idx) % nx]
    diff = np.abs(mirrored - np.conj(spec))
    diff[nx // 2] = 0.0
    return float(np.max(diff))


def _require_finite(field) -> None:
    if not np.all(np.isfinite(field.values)):
        raise InvalidInputError("field contains non-finite samples")


def sobolev_norm(f: Field, s: float) -> float:
    """H^s norm (sum <xi>^{2s} |u_hat|^2 / (2L))^{1/2}."""
    _require_finite(f)
    weight = japanese(f.grid.xi) ** (2.0 * s)
    total = f.grid.parseval_weight * np.sum(weight * np.abs(f.spectrum) ** 2)
    return float(np.sqrt(total))


def lp_norm(f: Field, p: float) -> float:
    """L^p quadrature norm in physical space."""
    _require_finite(f)
    if p <= 0:
        raise InvalidInputError(f"L^p exponent must be positive, got {p}")
    return float(np.sum(np.abs(f.values) ** p) * f.grid.dx) ** (1.0 / p)


def derivative(f: Field, order: int = 1) -> Field:
    """Spectral derivative; the Nyquist mode is dropped."""
    symbol = (1j * f.grid.xi) ** order * f.grid.nyquist_mask
    return f.with_spectrum(symbol * f.spectrum)


def dealias(f: Field) -> Field:
    return f.with_spectrum(f.spectrum * f.grid.dealias_mask)


def decay_check(f: Field) -> float:
    """Ratio of the boundary samples to the peak; the box is a stand-in for the line."""
    peak = f.max_abs()
    if peak == 0.0:
        return 0.0
    edge = max(abs(f.values[0]), abs(f.values[-1]))
    return float(edge / peak)


def random_band_limited(grid: Grid, kmax: float, rng: np.random.Generator,
                        real: bool = False, amplitude: float = 1.0) -> Field:
    """Random field with spectral support |xi| <= kmax, scaled to sup-norm `amplitude`."""
    band = np.abs(grid.xi) <= kmax
    spectrum = np.zeros(grid.nx, dtype=np.complex128)
    count = int(band.sum())
    spectrum[band] = rng.standard_normal(count) + 1j * rng.standard_normal(count)
    values = grid.inverse(spectrum)
    if real:
        values = values.real
    peak = np.max(np.abs(values))
    if peak > 0:
        values = values * (amplitude / peak)
    return RealField(grid, values) if real else ComplexField(grid, values)


@dataclass(frozen=True)
class MultiplierSpec:
    """The I_{N,s} symbol: 1 below N, N^{1-s}|xi|^{s-1} above 2N, quintic-smoothstep blend between."""

    N: float
    s: float

    def __post_init__(self):
        if not (np.isfinite(self.N) and self.N >= 2):
            raise InvalidInputError(f"multiplier N must be >= 2, got {self.N}")
        if not (np.isfinite(self.s) and self.s < 1):
            raise InvalidInputError(f"multiplier s must be < 1, got {self.s}")
        object.__setattr__(self, 'N', float(self.N))
        object.__setattr__(self, 's', float(self.s))

    @classmethod
    def identity_on(cls, grid: Grid, s: float = 0.5) -> 'MultiplierSpec':
        """A multiplier whose cutoff lies beyond the grid's largest frequency (m == 1 on the lattice)."""
        return cls(N=max(2.0, float(np.max(np.abs(grid.xi))) + 1.0), s=s)

    def symbol(self, xi) -> np.ndarray:
        a = np.abs(np.asarray(xi, dtype=float))
        m = np.ones_like(a)
        N, s = self.N, self.s
        high = a > 2.0 * N
        m[high] = N ** (1.0 - s) * a[high] ** (s - 1.0)
        band = (a > N) & ~high
        if np.any(band):
            r = np.log2(a[band] / N)
            theta = r ** 3 * (10.0 + r * (-15.0 + 6.0 * r))
            m[band] = np.exp(theta * (1.0 - s) * np.log(N / a[band]))
        return m


def apply_multiplier(f: Field, M: MultiplierSpec) -> Field:
    return f.with_spectrum(M.symbol(f.grid.xi) * f.spectrum)


def multiplier_equivalence_check(f: Field, M: MultiplierSpec) -> Tuple[float, float]:
    """Ratios ||If||_{H^1}/||f||_{H^s} and ||If||_{H^1}/(N^{1-s}||f||_{H^s}).

    For N >= 2 and 0 <= s < 1 the pointwise bounds on m(xi)<xi>^{1-s} give
    lower >= 1 and upper <= 2.
    """
    if not (0.0 <= M.s < 1.0):
        raise InvalidInputError(f"equivalence constants hold for 0 <= s < 1, got s={M.s}")
    hs = sobolev_norm(f, M.s)
    if hs == 0.0:
        raise UndefinedRatioError("||f||_{H^s} vanishes; equivalence ratio undefined")
    h1 = sobolev_norm(apply_multiplier(f, M), 1.0)
    return h1 / hs, h1 / (M.N ** (1.0 - M.s) * hs)


class Dispersion(str, Enum):
    SCHRODINGER = 'schrodinger'
    SCHRODINGER_CONJUGATE = 'schrodinger-conjugate'
    AIRY = 'airy'

    def symbol(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        if self is Dispersion.SCHRODINGER:
            return xi ** 2
        if self is Dispersion.SCHRODINGER_CONJUGATE:
            return -xi ** 2
        return -xi ** 3


@dataclass(frozen=True)
class NormSpec:
    s: float
    b: float
    dispersion: Dispersion = Dispersion.SCHRODINGER

    def __post_init__(self):
        object.__setattr__(self, 'dispersion', Dispersion(self.dispersion))


def psi(t) -> np.ndarray:
    """Even cutoff: 1 on |t| <= 1, 0 on |t| >= 2, exp(1 - 1/(1-(|t|-1)^2)) in between."""
    a = np.abs(np.asarray(t, dtype=float))
    out = np.zeros_like(a)
    out[a <= 1.0] = 1.0
    band = (a > 1.0) & (a < 2.0)
    r = a[band] - 1.0
    out[band] = np.exp(1.0 - 1.0 / (1.0 - r * r))
    return out


@dataclass(frozen=True, eq=False)
class SpaceTimeField:
    """Samples on grid.x x {t_j = (j - nt/2) dt}; values has shape (nx, nt)."""

    grid: Grid
    nt: int
    dt: float
    values: np.ndarray
    window: Optional[float] = None

    def __post_init__(self):
        nt = int(self.nt)
        if not _is_power_of_two(nt):
            raise ResolutionError(f"nt must be a power of two, got {self.nt}")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise InvalidInputError(f"dt must be positive, got {self.dt}")
        vals = np.array(self.values, dtype=np.complex128, copy=True)
        if vals.shape != (self.grid.nx, nt):
            raise InvalidInputError(
                f"space-time values have shape {vals.shape}, expected ({self.grid.nx}, {nt})")
        object.__setattr__(self, 'nt', nt)
        object.__setattr__(self, 'dt', float(self.dt))
        object.__setattr__(self, 'values', _frozen(vals))

    @cached_property
    def times(self) -> np.ndarray:
        return _frozen((np.arange(self.nt) - self.nt // 2) * self.dt)

    @classmethod
    def from_function(cls, grid: Grid, nt: int, dt: float,
                      fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> 'SpaceTimeField':
        t = (np.arange(nt) - nt // 2) * dt
        return cls(grid, nt, dt, fn(grid.x[:, None], t[None, :]))

    def with_values(self, values: np.ndarray, window: Optional[float] = None) -> 'SpaceTimeField':
        return SpaceTimeField(self.grid, self.nt, self.dt, values,
                              self.window if window is None else window)

    def time_reversed(self) -> 'SpaceTimeField':
        idx = (-np.arange(self.nt)) % self.nt
        return self.with_values(self.values[:, idx])

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.grid.dx * self.dt))

    @cached_property
    def padded_length(self) -> int:
        return TIME_PAD_FACTOR * self.nt

    @cached_property
    def tau(self) -> np.ndarray:
        return _frozen(2.0 * np.pi * sfft.fftfreq(self.padded_length, d=self.dt))

    @cached_property
    def spacetime_spectrum(self) -> np.ndarray:
        P, nt = self.padded_length, self.nt
        padded = np.zeros((self.grid.nx, P), dtype=np.complex128)
        start = P // 2 - nt // 2
        padded[:, start:start + nt] = self.values
        q = sfft.fftfreq(P, d=1.0 / P)
        phase = np.where(q % 2 == 0, 1.0, -1.0)
        in_time = self.dt * phase[None, :] * sfft.fft(padded, axis=1)
        return _frozen(self.grid.forward(in_time, axis=0))

    @property
    def parseval_weight(self) -> float:
        return self.grid.parseval_weight / (self.padded_length * self.dt)


def xsb_norm(F: SpaceTimeField, spec: NormSpec) -> float:
    """Discrete X_{s,b}(phi) norm (sum <xi>^{2s} <tau + phi(xi)>^{2b} |F_hat|^2 w)^{1/2}."""
    if F.nt < 8:
        raise ResolutionError(f"X_(s,b) norm needs nt >= 8 time samples, got {F.nt}")
    if F.window is None:
        logger.debug("xsb_norm on an unwindowed field (nt=%d)", F.nt)
    xi = F.grid.xi[:, None]
    modulation = F.tau[None, :] + spec.dispersion.symbol(xi)
    weight = japanese(xi) ** (2.0 * spec.s) * japanese(modulation) ** (2.0 * spec.b)
    total = F.parseval_weight * np.sum(weight * np.abs(F.spacetime_spectrum) ** 2)
    return float(np.sqrt(total))


def apply_window(F: SpaceTimeField, delta: float) -> SpaceTimeField:
    """Multiply by psi(t/delta); the support [-2 delta, 2 delta] must fit inside the time window."""
    if not (np.isfinite(delta) and delta > 0):
        raise WindowError(f"window scale must be positive, got {delta}")
    t = F.times
    reach = min(-t[0], t[-1])
    if 2.0 * delta > reach + 1e-12 * reach:
        raise WindowError(
            f"psi(t/{delta}) is supported on |t| <= {2 * delta}, beyond the window |t| <= {reach}")
    return F.with_values(F.values * psi(t / delta)[None, :], window=float(delta))
