"""
Empirical checks of the bi- and trilinear X_{s,b} estimates and of their
failure along the frequency-box counterexample family.

Estimate kinds (X = X_{s,b}(xi^2), Y = Y_{l,c} = X_{l,c}(-xi^3)):
    schrodinger-product   ||u v||_{X_{s,b'-1}}            <= C ||u||_X ||v||_Y
    kdv-output            ||d_x(u1 conj u2)||_{Y_{l,c'-1}} <= C ||u1||_X ||u2||_X
    trilinear             ||u1 u2 conj u3||_{L^2}          <= C ||u1||_X ||u2||_X ||u3||_X
    kdv-bilinear          ||d_x(v1 v2)||_{Y_{l,c'-1}}      <= C ||v1||_Y ||v2||_Y

Status: Active (library)
"""

import logging
import math
import warnings
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.special import hyp2f1

from duhamel import FrequencyInterval, InflationConfig, gauss_legendre
from errors import AsymptoticsWarning, FitError, InvalidInputError, UndefinedRatioError
from fitting import FitResult, fit_loglog
from spectral import (Dispersion, Grid, NormSpec, SpaceTimeField, apply_window, japanese,
                      xsb_norm)

logger = logging.getLogger(__name__)

ASYMPTOTIC_N = 16
# counterexample modulation bands
U1_BAND = 100.0
U2_BAND = 10.0
OUTPUT_BAND = 10.0
# ensemble boxes stay within |xi| <= 2.5, so triple products clear the 2/3 cutoff at nx=128, L=4 pi
MEMBER_REACH = 1.5


class EstimateKind(str, Enum):
    SCHRODINGER_PRODUCT = 'schrodinger-product'
    KDV_OUTPUT = 'kdv-output'
    TRILINEAR = 'trilinear'
    KDV_BILINEAR = 'kdv-bilinear'

    @property
    def input_dispersions(self) -> Tuple[Dispersion, ...]:
        S, W = Dispersion.SCHRODINGER, Dispersion.AIRY
        return {
            EstimateKind.SCHRODINGER_PRODUCT: (S, W),
            EstimateKind.KDV_OUTPUT: (S, S),
            EstimateKind.TRILINEAR: (S, S, S),
            EstimateKind.KDV_BILINEAR: (W, W),
        }[self]


@dataclass(frozen=True)
class EstimateCase:
    kind: EstimateKind = EstimateKind.SCHRODINGER_PRODUCT
    s: float = 0.0
    l: float = -0.5
    b: float = 0.51
    b_prime: float = 0.51
    c: float = 0.51
    c_prime: float = 0.51
    nx: int = 128
    nt: int = 256
    L: float = 4.0 * math.pi
    T: float = 8.0

    def __post_init__(self):
        object.__setattr__(self, 'kind', EstimateKind(self.kind))
        for name in ('b', 'b_prime', 'c', 'c_prime'):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise InvalidInputError(f"modulation index {name} must lie in (0, 1), got {value}")
        if self.T <= 0:
            raise InvalidInputError(f"time span T must be positive, got {self.T}")

    @property
    def case_id(self) -> str:
        return f"{self.kind.value}:s={self.s:g}:l={self.l:g}:nx={self.nx}"

    @property
    def grid(self) -> Grid:
        return Grid(self.nx, self.L)

    @property
    def dt(self) -> float:
        return self.T / self.nt

    @property
    def x_norm(self) -> NormSpec:
        return NormSpec(self.s, self.b, Dispersion.SCHRODINGER)

    @property
    def y_norm(self) -> NormSpec:
        return NormSpec(self.l, self.c, Dispersion.AIRY)

    def with_resolution(self, nx: int) -> 'EstimateCase':
        values = asdict(self)
        values['nx'] = nx
        return EstimateCase(**values)


def _product(fields: Sequence[SpaceTimeField], conjugate_last: bool) -> np.ndarray:
    grid = fields[0].grid
    values = [f.values for f in fields]
    if conjugate_last:
        values[-1] = np.conj(values[-1])
    prod = values[0]
    for v in values[1:]:
        prod = prod * v
    return grid.dealiased(prod)


def _x_derivative(F: SpaceTimeField, values: np.ndarray) -> np.ndarray:
    grid = F.grid
    ik = (1j * grid.xi * grid.nyquist_mask)[:, None]
    return grid.inverse(ik * grid.forward(values, axis=0), axis=0)


def _lhs_rhs(case: EstimateCase, fields: Sequence[SpaceTimeField]) -> Tuple[float, float]:
    kind = case.kind
    first = fields[0]
    if kind is EstimateKind.SCHRODINGER_PRODUCT:
        out = first.with_values(_product(fields, conjugate_last=False))
        lhs = xsb_norm(out, NormSpec(case.s, case.b_prime - 1.0, Dispersion.SCHRODINGER))
        rhs = xsb_norm(fields[0], case.x_norm) * xsb_norm(fields[1], case.y_norm)
    elif kind is EstimateKind.KDV_OUTPUT:
        out = first.with_values(_x_derivative(first, _product(fields, conjugate_last=True)))
        lhs = xsb_norm(out, NormSpec(case.l, case.c_prime - 1.0, Dispersion.AIRY))
        rhs = xsb_norm(fields[0], case.x_norm) * xsb_norm(fields[1], case.x_norm)
    elif kind is EstimateKind.TRILINEAR:
        out = first.with_values(_product(fields, conjugate_last=True))
        lhs = xsb_norm(out, NormSpec(0.0, 0.0, Dispersion.SCHRODINGER))
        rhs = math.prod(xsb_norm(f, case.x_norm) for f in fields)
    else:
        out = first.with_values(_x_derivative(first, _product(fields, conjugate_last=False)))
        lhs = xsb_norm(out, NormSpec(case.l, case.c_prime - 1.0, Dispersion.AIRY))
        rhs = xsb_norm(fields[0], case.y_norm) * xsb_norm(fields[1], case.y_norm)
    return lhs, rhs


def bilinear_ratio(case: EstimateCase, u: SpaceTimeField, v: SpaceTimeField,
                   w: Optional[SpaceTimeField] = None) -> float:
    """LHS norm over the product of RHS norms for the case's inequality."""
    return estimate_terms(case, u, v, w)[2]


def estimate_terms(case: EstimateCase, u: SpaceTimeField, v: SpaceTimeField,
                   w: Optional[SpaceTimeField] = None) -> Tuple[float, float, float]:
    fields = [u, v] if w is None else [u, v, w]
    expected = len(case.kind.input_dispersions)
    if len(fields) != expected:
        raise InvalidInputError(f"{case.kind.value} takes {expected} inputs, got {len(fields)}")
    if any(f.grid != u.grid or f.nt != u.nt or f.dt != u.dt for f in fields):
        raise InvalidInputError("estimate inputs must share grid and time lattice")
    lhs, rhs = _lhs_rhs(case, fields)
    if rhs == 0.0:
        if all(not np.any(f.values) for f in fields):
            raise UndefinedRatioError("all inputs vanish; the ratio is 0/0")
        return lhs, rhs, 0.0
    return lhs, rhs, lhs / rhs


def localized_field(grid: Grid, nt: int, dt: float, box: Tuple[float, float], band: float,
                    dispersion: Dispersion, rng: np.random.Generator, modes: int = 4,
                    delta: Optional[float] = None) -> SpaceTimeField:
    """Random field on xi in box with modulation |tau + phi(xi)| <= band, windowed by psi(t/delta).

    Each lattice frequency in the box carries `modes` unit-variance complex
    Gaussian amplitudes at modulations drawn uniformly from [-band, band].
    """
    dispersion = Dispersion(dispersion)
    lo, hi = box
    inside = np.flatnonzero((grid.xi >= lo) & (grid.xi <= hi))
    if inside.size == 0:
        raise InvalidInputError(f"frequency box [{lo}, {hi}] holds no lattice frequency")
    # draw in increasing-frequency order so equal boxes give equal fields at any nx
    inside = inside[np.argsort(grid.xi[inside])]
    t = (np.arange(nt) - nt // 2) * dt
    spectrum = np.zeros((grid.nx, nt), dtype=np.complex128)
    for idx in inside:
        amps = rng.standard_normal(modes) + 1j * rng.standard_normal(modes)
        sigma = rng.uniform(-band, band, modes)
        omega = dispersion.symbol(grid.xi[idx]) + sigma
        spectrum[idx] = amps @ np.exp(-1j * omega[:, None] * t[None, :])
    F = SpaceTimeField(grid, nt, dt, grid.inverse(spectrum, axis=0))
    if delta is None:
        delta = 0.5 * min(-t[0], t[-1])
    return apply_window(F, delta)


def _member_inputs(case: EstimateCase, rng: np.random.Generator) -> List[SpaceTimeField]:
    grid = case.grid
    # boxes are drawn in continuum frequency so every nx sees the same fields
    fields = []
    for dispersion in case.kind.input_dispersions:
        centre = rng.uniform(-MEMBER_REACH, MEMBER_REACH)
        width = rng.uniform(0.5, 1.0)
        band = rng.uniform(0.5, 4.0)
        fields.append(localized_field(grid, case.nt, case.dt, (centre - width, centre + width),
                                      band, dispersion, rng))
    return fields


def _ensemble_member(case: EstimateCase, index: int, seed_seq: np.random.SeedSequence) -> Dict:
    rng = np.random.default_rng(seed_seq)
    lhs, rhs, ratio = estimate_terms(case, *_member_inputs(case, rng))
    return {'case': case.case_id, 'sample': index, 'LHS': lhs, 'RHS': rhs, 'ratio': ratio}


def ensemble(case: EstimateCase, size: int, seed: int,
             mapper: Optional[Callable] = None) -> pd.DataFrame:
    """Per-sample LHS, RHS and ratio over a frequency-localized random ensemble.

    Member i draws from the i-th child of SeedSequence(seed); `mapper` (an
    executor's map) may evaluate members concurrently, order is preserved.
    """
    if size < 1:
        raise InvalidInputError(f"ensemble size must be >= 1, got {size}")
    children = np.random.SeedSequence(seed).spawn(size)
    mapper = mapper or map
    rows = list(mapper(_ensemble_member, [case] * size, range(size), children))
    rows.sort(key=lambda r: r['sample'])
    return pd.DataFrame(rows, columns=['case', 'sample', 'LHS', 'RHS', 'ratio'])


def ensemble_summary(frame: pd.DataFrame) -> Dict:
    return {'max_ratio': float(frame['ratio'].max()),
            'median_ratio': float(frame['ratio'].median()),
            'samples': int(len(frame))}


# ---------------------------------------------------------------------------
# counterexample family
# ---------------------------------------------------------------------------

def modulation_mass(band: float, exponent: float) -> float:
    """int_{-band}^{band} <sigma>^{2 exponent} dsigma in closed form."""
    return 2.0 * band * float(hyp2f1(-exponent, 0.5, 1.5, -band * band))


def frequency_mass(box: FrequencyInterval, exponent: float, points: int = 64) -> float:
    """int_box <xi>^{2 exponent} dxi by Gauss-Legendre in offsets from the centre."""
    x, w = gauss_legendre(points)
    y = box.half_width * x
    return box.half_width * float(np.sum(w * japanese(box.center + y) ** (2.0 * exponent)))


def indicator_norm(box: FrequencyInterval, band: float, s: float, b: float, points: int = 64) -> float:
    """X_{s,b} norm of chi{xi in box, |tau + xi^2| <= band}."""
    return math.sqrt(frequency_mass(box, s, points) * modulation_mass(band, b))


def _overlap(D: np.ndarray) -> np.ndarray:
    """|[-U2_BAND, U2_BAND] cap [D - U1_BAND, D + U1_BAND]|."""
    lo = np.maximum(-U2_BAND, D - U1_BAND)
    hi = np.minimum(U2_BAND, D + U1_BAND)
    return np.maximum(hi - lo, 0.0)


@dataclass
class CounterexampleResult:
    N: float
    k: int
    lhs: float
    u1_norm: float
    u2_norm: float
    inclusion: bool

    @property
    def ratio(self) -> float:
        return self.lhs / (self.u1_norm * self.u2_norm)

    def to_dict(self) -> Dict:
        return {'N': self.N, 'k': self.k, 'LHS': self.lhs, 'u1_norm': self.u1_norm,
                'u2_norm': self.u2_norm, 'ratio': self.ratio, 'inclusion': self.inclusion}


def counterexample_family(N: float, case: EstimateCase, points: int = 48) -> CounterexampleResult:
    """Restricted LHS of the kdv-output estimate on the box family at frequency N.

    u1_hat = chi{Upsilon_1, |tau + xi^2| <= 100}, the conjugated factor is
    chi{Upsilon_2, |tau - xi^2| <= 10} and the output is measured on
    {xi in Upsilon, |tau - xi^3| <= 10}. Writing tau = xi^3 + sigma and
    tau_2 = xi_2^2 + rho the tau-overlap depends only on sigma + Q1(xi, xi_2).
    """
    if case.kind is not EstimateKind.KDV_OUTPUT:
        raise InvalidInputError(f"counterexample family targets kdv-output, got {case.kind.value}")
    if N < ASYMPTOTIC_N:
        message = f"N={N} is below {ASYMPTOTIC_N}; box family is outside its asymptotic range"
        logger.warning(message)
        warnings.warn(message, AsymptoticsWarning, stacklevel=2)
    cfg = InflationConfig.build(N, s=case.s, l=case.l)
    ups, ups1, ups2 = cfg.upsilon, cfg.upsilon1, cfg.upsilon2
    x, w = gauss_legendre(points)

    c = ups.center
    y = ups.half_width * x                      # xi = c + y
    sigma = OUTPUT_BAND * x                     # tau - xi^3
    # xi_2 = ups2.center + z over Upsilon_2 cap (xi - Upsilon_1)
    offset = (c - (ups1.center + ups2.center)) + y
    lo = np.maximum(offset - ups1.half_width, -ups2.half_width)
    hi = np.minimum(offset + ups1.half_width, ups2.half_width)
    half = np.maximum(0.5 * (hi - lo), 0.0)
    z = 0.5 * (lo + hi)[:, None] + half[:, None] * x[None, :]
    xi = c + y
    Q = xi[:, None] * ((2.0 * c + 1.0) * y[:, None] + y[:, None] ** 2 - 2.0 * z)

    D = sigma[None, :, None] + Q[:, None, :]            # (xi, sigma, xi_2)
    conv = half[:, None] * (_overlap(D) @ w)            # (xi, sigma)
    weight = (japanese(xi) ** (2.0 * case.l) * xi ** 2)[:, None] \
        * japanese(sigma)[None, :] ** (2.0 * (case.c_prime - 1.0))
    integrand = weight * conv ** 2
    lhs_sq = ups.half_width * OUTPUT_BAND * float(w @ integrand @ w)

    return CounterexampleResult(
        N=cfg.N, k=cfg.k, lhs=math.sqrt(lhs_sq),
        u1_norm=indicator_norm(ups1, U1_BAND, case.s, case.b, points),
        u2_norm=indicator_norm(ups2, U2_BAND, case.s, case.b, points),
        inclusion=cfg.support_inclusion(),
    )


@dataclass
class CounterexampleSweep:
    results: List[CounterexampleResult]
    fit: Optional[FitResult]

    def ratios(self) -> List[float]:
        return [r.ratio for r in self.results]

    def growth_factors(self) -> List[float]:
        ratios = self.ratios()
        return [b / a for a, b in zip(ratios, ratios[1:])]

    def bounded(self, factor: float = 2.0) -> bool:
        """No ratio exceeds `factor` times the ratio at the smallest N."""
        ratios = self.ratios()
        return all(r <= factor * ratios[0] for r in ratios)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.to_dict() for r in self.results])


def counterexample_sweep(case: EstimateCase, N_list: Iterable[float], points: int = 48) -> CounterexampleSweep:
    results = [counterexample_family(N, case, points) for N in sorted(N_list)]
    fit = None
    if len(results) >= 3:
        try:
            fit = fit_loglog([(r.N, r.ratio) for r in results])
            logger.info("counterexample ratio exponent %.3f (s=%g, l=%g)", fit.slope, case.s, case.l)
        except FitError as exc:
            logger.warning("counterexample fit skipped: %s", exc)
    return CounterexampleSweep(results, fit)
