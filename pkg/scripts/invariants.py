"""
Conserved and almost-conserved functionals of the Schrodinger-KdV flow.

    M_I = ||Iu||
    L_I = alpha ||Iv||^2 + 2 gamma int Im(Iu conj(Iu_x))
    E_I = alpha gamma int Iv |Iu|^2 + gamma ||Iu_x||^2 + alpha/2 ||Iv_x||^2
          - alpha/6 int (Iv)^3 + beta gamma/2 int Q^4

where Q is Iu (variant "u4") or Iv (variant "v4"). With I the identity the
"u4" energy and L are exact invariants of the flow; the "v4" form is kept
callable for comparison.

Status: Active (library)
"""

import logging
from dataclasses import dataclass
from functools import partial
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from errors import InvalidInputError
from propagators import SolverConfig, SystemParams, SystemState, Trajectory, evolve
from spectral import (ComplexField, MultiplierSpec, RealField, apply_multiplier, dealias,
                      derivative, sobolev_norm)

logger = logging.getLogger(__name__)

ENERGY_VARIANTS = ('u4', 'v4')
# outcome of select_energy_variant on the identity-multiplier oracle
DEFAULT_ENERGY_VARIANT = 'u4'


def _integral(values: np.ndarray, dx: float) -> float:
    return float(np.sum(values) * dx)


def _smoothed(u: ComplexField, v: RealField, M: Optional[MultiplierSpec]) -> Tuple[ComplexField, RealField]:
    if u.grid != v.grid:
        raise InvalidInputError("u and v must live on the same grid")
    if M is None:
        return u, v
    return apply_multiplier(u, M), apply_multiplier(v, M)


def mass(u: ComplexField) -> float:
    """L^2 quadrature norm of u."""
    return float(np.sqrt(_integral(np.abs(u.values) ** 2, u.grid.dx)))


def functional_L(u: ComplexField, v: RealField, p: SystemParams,
                 M: Optional[MultiplierSpec] = None) -> float:
    Iu, Iv = _smoothed(u, v, M)
    dx = u.grid.dx
    momentum = _integral(np.imag(Iu.values * np.conj(derivative(Iu).values)), dx)
    return p.alpha * _integral(Iv.values ** 2, dx) + 2.0 * p.gamma * momentum


def functional_E(u: ComplexField, v: RealField, p: SystemParams,
                 M: Optional[MultiplierSpec] = None, variant: str = DEFAULT_ENERGY_VARIANT) -> float:
    if variant not in ENERGY_VARIANTS:
        raise InvalidInputError(f"energy variant must be one of {ENERGY_VARIANTS}, got {variant!r}")
    Iu, Iv = _smoothed(u, v, M)
    dx = u.grid.dx
    a, b, g = p.alpha, p.beta, p.gamma

    ux = derivative(Iu).values
    vx = derivative(Iv).values
    # odd powers are formed in physical space from dealiased samples
    ud = dealias(Iu).values
    vd = dealias(Iv).values
    density = np.abs(ud) ** 2

    energy = (a * g * _integral(vd * density, dx)
              + g * _integral(np.abs(ux) ** 2, dx)
              + 0.5 * a * _integral(vx ** 2, dx)
              - a / 6.0 * _integral(vd ** 3, dx))
    quartic = density ** 2 if variant == 'u4' else vd ** 4
    return energy + 0.5 * b * g * _integral(quartic, dx)


def interp_bound_check(u: ComplexField, v: RealField, p: SystemParams,
                       M: Optional[MultiplierSpec] = None,
                       variant: str = DEFAULT_ENERGY_VARIANT) -> Tuple[float, float]:
    """(||Iu||_{H^1}^2 + ||Iv||_{H^1}^2, |E_I| + |L_I|^{5/3} + M_I^8 + 1)."""
    Iu, Iv = _smoothed(u, v, M)
    lhs = sobolev_norm(Iu, 1.0) ** 2 + sobolev_norm(Iv, 1.0) ** 2
    rhs = (abs(functional_E(u, v, p, M, variant))
           + abs(functional_L(u, v, p, M)) ** (5.0 / 3.0)
           + mass(Iu) ** 8 + 1.0)
    return lhs, rhs


@dataclass
class FunctionalReport:
    t: np.ndarray
    M: np.ndarray
    L: np.ndarray
    E: np.ndarray
    drift_L: np.ndarray
    drift_E: np.ndarray
    N: float

    def __post_init__(self):
        lengths = {len(self.t), len(self.M), len(self.L), len(self.E), len(self.drift_L), len(self.drift_E)}
        if len(lengths) != 1:
            raise InvalidInputError("functional report arrays must share one length")

    @property
    def final_drift_E(self) -> float:
        return float(self.drift_E[-1])

    @property
    def final_drift_L(self) -> float:
        return float(self.drift_L[-1])

    def relative_drift(self, name: str) -> float:
        values = getattr(self, name)
        scale = abs(values[0])
        return float(np.max(np.abs(values - values[0])) / scale) if scale > 0 else float('nan')

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            't': self.t, 'M': self.M, 'L': self.L, 'E': self.E,
            'driftL': self.drift_L, 'driftE': self.drift_E,
            'N': np.full(len(self.t), self.N),
        })


def functional_report(trajectory: Trajectory, p: SystemParams,
                      M: Optional[MultiplierSpec] = None,
                      variant: str = DEFAULT_ENERGY_VARIANT) -> FunctionalReport:
    """M_I, L_I, E_I and their drifts at every recorded state of a trajectory."""
    Ms, Ls, Es = [], [], []
    for state in trajectory.states:
        Iu = apply_multiplier(state.u, M) if M is not None else state.u
        Ms.append(mass(Iu))
        Ls.append(functional_L(state.u, state.v, p, M))
        Es.append(functional_E(state.u, state.v, p, M, variant))
    L, E = np.array(Ls), np.array(Es)
    return FunctionalReport(
        t=np.array(trajectory.times), M=np.array(Ms), L=L, E=E,
        drift_L=np.abs(L - L[0]), drift_E=np.abs(E - E[0]),
        N=M.N if M is not None else float('inf'),
    )


@dataclass
class DriftTable:
    reports: List[FunctionalReport]

    def rows(self) -> List[Dict]:
        out = []
        for report in self.reports:
            out.append({
                'N': report.N,
                'E0': float(report.E[0]),
                'L0': float(report.L[0]),
                'drift_E': report.final_drift_E,
                'drift_L': report.final_drift_L,
                'max_drift_E': float(np.max(report.drift_E)),
                'max_drift_L': float(np.max(report.drift_L)),
            })
        return out

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows())

    def drift_E(self) -> List[float]:
        return [r.final_drift_E for r in self.reports]

    def nonincreasing(self, band: float = 1.5) -> bool:
        """drift_E(N) never exceeds `band` times the smallest drift seen at lower N."""
        drifts = self.drift_E()
        floor = drifts[0]
        for value in drifts[1:]:
            if value > band * floor:
                return False
            floor = min(floor, value)
        return True


def almost_conservation_run(data: SystemState, p: SystemParams, M_list: Sequence[MultiplierSpec],
                            delta: float, cfg: SolverConfig,
                            variant: str = DEFAULT_ENERGY_VARIANT,
                            mapper: Optional[Callable] = None) -> DriftTable:
    """Evolve once to delta and measure E_I, L_I drift for every multiplier on that trajectory.

    `mapper` (e.g. a pool's map) evaluates the per-multiplier reports in N order.
    """
    p.require_positive_coupling()
    if not M_list:
        raise InvalidInputError("almost_conservation_run needs at least one multiplier")
    trajectory = evolve(data, delta, cfg, p)
    ordered = sorted(M_list, key=lambda m: m.N)
    report = partial(functional_report, trajectory, p, variant=variant)
    table = DriftTable(list((mapper or map)(report, ordered)))

    for report in table.reports:
        logger.info("N=%g: drift_E=%.3e drift_L=%.3e", report.N, report.final_drift_E, report.final_drift_L)
        if report.final_drift_L > 10.0 * report.final_drift_E:
            logger.warning("N=%g: L_I drift %.3e exceeds ten times the E_I drift %.3e",
                           report.N, report.final_drift_L, report.final_drift_E)
    if not table.nonincreasing():
        logger.warning("E_I drift is not non-increasing in N within the 1.5x band: %s", table.drift_E())
    return table


def select_energy_variant(data: SystemState, p: SystemParams, T: float = 1.0,
                          cfg: Optional[SolverConfig] = None,
                          tolerance: float = 1e-6) -> Tuple[str, Dict[str, float]]:
    """Run the identity-multiplier flow and return the energy variant that is conserved.

    Returns the variant name and the relative drift of every variant.
    """
    cfg = cfg or SolverConfig(dt=1e-4, record_every=100)
    return choose_energy_variant(evolve(data, T, cfg, p), p, tolerance)


def energy_variant_drifts(trajectory: Trajectory, p: SystemParams) -> Dict[str, float]:
    """Relative drift of every energy variant with I the identity."""
    return {variant: functional_report(trajectory, p, None, variant).relative_drift('E')
            for variant in ENERGY_VARIANTS}


def choose_energy_variant(trajectory: Trajectory, p: SystemParams,
                          tolerance: float = 1e-6) -> Tuple[str, Dict[str, float]]:
    drifts = energy_variant_drifts(trajectory, p)
    conserved = [v for v, d in drifts.items() if d < tolerance]
    if len(conserved) != 1:
        logger.warning("expected exactly one conserved energy variant, drifts %s", drifts)
        return min(drifts, key=drifts.get), drifts
    logger.info("conserved energy variant: %s (drifts %s)", conserved[0], drifts)
    return conserved[0], drifts
