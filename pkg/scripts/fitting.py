"""
Log-log exponent fitting for scaling experiments.

Status: Active (library)
"""

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Tuple

import numpy as np
from scipy import stats

from errors import FitError

MIN_FIT_POINTS = 3


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    stderr: float
    points: List[Tuple[float, float]] = field(default_factory=list)

    def predict(self, x: float) -> float:
        return float(np.exp(self.intercept) * x ** self.slope)

    def to_dict(self) -> Dict:
        return {
            'slope': self.slope,
            'intercept': self.intercept,
            'stderr': self.stderr,
            'points': [list(p) for p in self.points],
        }


def fit_loglog(points: Iterable[Tuple[float, float]]) -> FitResult:
    """Least-squares line through (log x, log y)."""
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) < MIN_FIT_POINTS:
        raise FitError(f"log-log fit needs at least {MIN_FIT_POINTS} points, got {len(pts)}")
    xs = np.array([p[0] for p in pts])
    ys = np.array([p[1] for p in pts])
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
        raise FitError("log-log fit received non-finite values")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise FitError("log-log fit requires strictly positive x and y")
    logx, logy = np.log(xs), np.log(ys)
    if np.ptp(logx) == 0:
        raise FitError("log-log fit needs at least two distinct x values")

    result = stats.linregress(logx, logy)
    stderr = float(result.stderr)
    if not np.isfinite(stderr):
        raise FitError("slope standard error is not finite")
    return FitResult(
        slope=float(result.slope),
        intercept=float(result.intercept),
        stderr=stderr,
        points=list(zip(logx.tolist(), logy.tolist())),
    )
