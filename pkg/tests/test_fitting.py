import math

import pytest

from errors import FitError
from fitting import fit_loglog


def test_exact_power_law():
    points = [(N, 3.0 * N ** 1.5) for N in (2.0, 4.0, 8.0, 16.0)]
    fit = fit_loglog(points)
    assert fit.slope == pytest.approx(1.5, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(3.0), abs=1e-12)
    assert fit.stderr == pytest.approx(0.0, abs=1e-10)
    assert fit.predict(32.0) == pytest.approx(3.0 * 32.0 ** 1.5, rel=1e-10)


def test_noisy_slope_has_stderr():
    points = [(1.0, 1.0), (2.0, 2.2), (4.0, 3.7), (8.0, 8.5)]
    fit = fit_loglog(points)
    assert 0.8 < fit.slope < 1.2
    assert fit.stderr > 0
    assert set(fit.to_dict()) == {'slope', 'intercept', 'stderr', 'points'}


@pytest.mark.parametrize('points', [
    [(1.0, 1.0), (2.0, 2.0)],
    [(1.0, 1.0), (2.0, -2.0), (4.0, 4.0)],
    [(0.0, 1.0), (2.0, 2.0), (4.0, 4.0)],
    [(1.0, 1.0), (2.0, float('nan')), (4.0, 4.0)],
    [(2.0, 1.0), (2.0, 2.0), (2.0, 4.0)],
])
def test_rejected_inputs(points):
    with pytest.raises(FitError):
        fit_loglog(points)
